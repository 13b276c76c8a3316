#include "vtsdf/image.hpp"

#include <fstream>
#include <sstream>

#include "vtsdf/errors.hpp"

namespace vtsdf {

namespace {

// Reads the PNM header tokens, skipping comments.
void read_header(std::istream& in, const std::string& magic, int& w, int& h,
                 int* maxval) {
  std::string tok;
  in >> tok;
  if (tok != magic) throw IoError("pnm: expected " + magic + ", got " + tok);
  auto next_int = [&]() {
    std::string s;
    while (in >> s) {
      if (s[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return std::stoi(s);
    }
    throw IoError("pnm: truncated header");
  };
  w = next_int();
  h = next_int();
  if (maxval) *maxval = next_int();
  in.get();  // single whitespace before payload
}

}  // namespace

void save_pgm16(const Image<uint16_t>& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_pgm16: cannot open " + path);
  f << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<uint8_t> row(size_t(img.width) * 2);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      uint16_t v = img.at(x, y);
      row[2 * x] = uint8_t(v >> 8);  // big-endian per PGM
      row[2 * x + 1] = uint8_t(v & 0xff);
    }
    f.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!f) throw IoError("save_pgm16: write failed for " + path);
}

Image<uint16_t> load_pgm16(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_pgm16: cannot open " + path);
  int w, h, maxval;
  read_header(f, "P5", w, h, &maxval);
  if (maxval != 65535) throw IoError("load_pgm16: expected 16-bit maxval");
  Image<uint16_t> img(w, h);
  std::vector<uint8_t> row(size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!f) throw IoError("load_pgm16: truncated payload in " + path);
    for (int x = 0; x < w; ++x)
      img.at(x, y) = uint16_t(row[2 * x] << 8 | row[2 * x + 1]);
  }
  return img;
}

void save_pbm(const Image<uint8_t>& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_pbm: cannot open " + path);
  f << "P4\n" << img.width << " " << img.height << "\n";
  int stride = (img.width + 7) / 8;
  std::vector<uint8_t> row(stride);
  for (int y = 0; y < img.height; ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < img.width; ++x)
      if (img.at(x, y)) row[x / 8] |= uint8_t(0x80 >> (x % 8));
    f.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!f) throw IoError("save_pbm: write failed for " + path);
}

Image<uint8_t> load_pbm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_pbm: cannot open " + path);
  int w, h;
  read_header(f, "P4", w, h, nullptr);
  Image<uint8_t> img(w, h);
  int stride = (w + 7) / 8;
  std::vector<uint8_t> row(stride);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!f) throw IoError("load_pbm: truncated payload in " + path);
    for (int x = 0; x < w; ++x)
      img.at(x, y) = (row[x / 8] >> (7 - x % 8)) & 1;
  }
  return img;
}

}  // namespace vtsdf
