#include "vtsdf/marching_cubes.hpp"

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

#include "vtsdf/errors.hpp"

namespace vtsdf {
namespace {

// Corners 0-3 ring the z- face counter-clockwise from the cell origin,
// 4-7 sit above them; edge e joins kEdgeVerts[e][0] and [1].
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeVerts[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                   {4, 5}, {6, 5}, {6, 7}, {7, 4},
                                   {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Classic 256-case triangle table (Bourke / Stanford corner layout); edge
// triples per case, -1 padded. Bit c of the case index is set when corner c
// sits at or below the iso level.
constexpr int8_t kTriTable[256][16] = {
    {-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {0,8,3,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {1,9,0,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {8,1,9,8,3,1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {2,10,1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {0,8,3,1,2,10,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {9,2,10,9,0,2,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {3,2,10,3,10,8,8,10,9,-1,-1,-1,-1,-1,-1,-1},
    {2,3,11,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {11,0,8,11,2,0,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {1,9,0,2,3,11,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {2,1,9,2,9,11,11,9,8,-1,-1,-1,-1,-1,-1,-1},
    {3,10,1,3,11,10,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {1,0,8,1,8,10,10,8,11,-1,-1,-1,-1,-1,-1,-1}, {0,3,11,0,11,9,9,11,10,-1,-1,-1,-1,-1,-1,-1}, {11,10,9,11,9,8,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {4,7,8,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {4,3,0,4,7,3,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {4,7,8,9,0,1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {9,4,7,9,7,1,1,7,3,-1,-1,-1,-1,-1,-1,-1},
    {4,7,8,1,2,10,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {4,3,0,4,7,3,2,10,1,-1,-1,-1,-1,-1,-1,-1}, {2,9,0,2,10,9,4,7,8,-1,-1,-1,-1,-1,-1,-1}, {3,2,7,7,9,4,7,2,9,9,2,10,-1,-1,-1,-1},
    {8,4,7,3,11,2,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {7,11,2,7,2,4,4,2,0,-1,-1,-1,-1,-1,-1,-1}, {2,3,11,1,9,0,8,4,7,-1,-1,-1,-1,-1,-1,-1}, {2,1,9,2,9,4,2,4,11,11,4,7,-1,-1,-1,-1},
    {10,3,11,10,1,3,8,4,7,-1,-1,-1,-1,-1,-1,-1}, {4,7,0,0,10,1,7,10,0,7,11,10,-1,-1,-1,-1}, {8,4,7,0,3,11,0,11,9,9,11,10,-1,-1,-1,-1}, {7,9,4,7,11,9,9,11,10,-1,-1,-1,-1,-1,-1,-1},
    {4,9,5,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {8,3,0,4,9,5,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {0,5,4,0,1,5,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {4,8,3,4,3,5,5,3,1,-1,-1,-1,-1,-1,-1,-1},
    {1,2,10,9,5,4,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {4,9,5,8,3,0,1,2,10,-1,-1,-1,-1,-1,-1,-1}, {10,5,4,10,4,2,2,4,0,-1,-1,-1,-1,-1,-1,-1}, {4,8,3,4,3,2,4,2,5,5,2,10,-1,-1,-1,-1},
    {2,3,11,5,4,9,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {11,0,8,11,2,0,9,5,4,-1,-1,-1,-1,-1,-1,-1}, {5,0,1,5,4,0,3,11,2,-1,-1,-1,-1,-1,-1,-1}, {11,2,8,8,5,4,2,5,8,2,1,5,-1,-1,-1,-1},
    {3,10,1,3,11,10,5,4,9,-1,-1,-1,-1,-1,-1,-1}, {9,5,4,1,0,8,1,8,10,10,8,11,-1,-1,-1,-1}, {10,5,11,11,0,3,11,5,0,0,5,4,-1,-1,-1,-1}, {4,10,5,4,8,10,10,8,11,-1,-1,-1,-1,-1,-1,-1},
    {7,9,5,7,8,9,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {0,9,5,0,5,3,3,5,7,-1,-1,-1,-1,-1,-1,-1}, {8,0,1,8,1,7,7,1,5,-1,-1,-1,-1,-1,-1,-1}, {3,1,5,3,5,7,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {7,9,5,7,8,9,1,2,10,-1,-1,-1,-1,-1,-1,-1}, {1,2,10,0,9,5,0,5,3,3,5,7,-1,-1,-1,-1}, {7,8,5,5,2,10,8,2,5,8,0,2,-1,-1,-1,-1}, {10,3,2,10,5,3,3,5,7,-1,-1,-1,-1,-1,-1,-1},
    {9,7,8,9,5,7,11,2,3,-1,-1,-1,-1,-1,-1,-1}, {0,9,2,2,7,11,2,9,7,7,9,5,-1,-1,-1,-1}, {3,11,2,8,0,1,8,1,7,7,1,5,-1,-1,-1,-1}, {2,7,11,2,1,7,7,1,5,-1,-1,-1,-1,-1,-1,-1},
    {11,1,3,11,10,1,7,8,9,7,9,5,-1,-1,-1,-1}, {11,10,1,11,1,7,7,1,0,7,0,9,7,9,5,-1}, {5,7,8,5,8,10,10,8,0,10,0,3,10,3,11,-1}, {11,10,5,11,5,7,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {10,6,5,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {0,8,3,10,6,5,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {9,0,1,5,10,6,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {8,1,9,8,3,1,10,6,5,-1,-1,-1,-1,-1,-1,-1},
    {6,1,2,6,5,1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {6,1,2,6,5,1,0,8,3,-1,-1,-1,-1,-1,-1,-1}, {5,9,0,5,0,6,6,0,2,-1,-1,-1,-1,-1,-1,-1}, {6,5,2,2,8,3,5,8,2,5,9,8,-1,-1,-1,-1},
    {2,3,11,10,6,5,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {0,11,2,0,8,11,6,5,10,-1,-1,-1,-1,-1,-1,-1}, {0,1,9,3,11,2,10,6,5,-1,-1,-1,-1,-1,-1,-1}, {10,6,5,2,1,9,2,9,11,11,9,8,-1,-1,-1,-1},
    {11,6,5,11,5,3,3,5,1,-1,-1,-1,-1,-1,-1,-1}, {11,6,8,8,1,0,8,6,1,1,6,5,-1,-1,-1,-1}, {0,3,11,0,11,6,0,6,9,9,6,5,-1,-1,-1,-1}, {5,11,6,5,9,11,11,9,8,-1,-1,-1,-1,-1,-1,-1},
    {7,8,4,6,5,10,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {3,4,7,3,0,4,5,10,6,-1,-1,-1,-1,-1,-1,-1}, {6,5,10,7,8,4,9,0,1,-1,-1,-1,-1,-1,-1,-1}, {5,10,6,9,4,7,9,7,1,1,7,3,-1,-1,-1,-1},
    {1,6,5,1,2,6,7,8,4,-1,-1,-1,-1,-1,-1,-1}, {7,0,4,7,3,0,6,5,1,6,1,2,-1,-1,-1,-1}, {4,7,8,5,9,0,5,0,6,6,0,2,-1,-1,-1,-1}, {2,6,5,2,5,3,3,5,9,3,9,4,3,4,7,-1},
    {4,7,8,5,10,6,11,2,3,-1,-1,-1,-1,-1,-1,-1}, {6,5,10,7,11,2,7,2,4,4,2,0,-1,-1,-1,-1}, {4,7,8,9,0,1,6,5,10,3,11,2,-1,-1,-1,-1}, {6,5,10,11,4,7,11,2,4,4,2,9,9,2,1,-1},
    {7,8,4,11,6,5,11,5,3,3,5,1,-1,-1,-1,-1}, {0,4,7,0,7,1,1,7,11,1,11,6,1,6,5,-1}, {4,7,8,9,6,5,9,0,6,6,0,11,11,0,3,-1}, {7,11,4,11,9,4,11,5,9,11,6,5,-1,-1,-1,-1},
    {10,4,9,10,6,4,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {10,4,9,10,6,4,8,3,0,-1,-1,-1,-1,-1,-1,-1}, {1,10,6,1,6,0,0,6,4,-1,-1,-1,-1,-1,-1,-1}, {4,8,6,6,1,10,6,8,1,1,8,3,-1,-1,-1,-1},
    {9,1,2,9,2,4,4,2,6,-1,-1,-1,-1,-1,-1,-1}, {0,8,3,9,1,2,9,2,4,4,2,6,-1,-1,-1,-1}, {0,2,6,0,6,4,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {3,4,8,3,2,4,4,2,6,-1,-1,-1,-1,-1,-1,-1},
    {4,10,6,4,9,10,2,3,11,-1,-1,-1,-1,-1,-1,-1}, {8,2,0,8,11,2,4,9,10,4,10,6,-1,-1,-1,-1}, {2,3,11,1,10,6,1,6,0,0,6,4,-1,-1,-1,-1}, {8,11,2,8,2,4,4,2,1,4,1,10,4,10,6,-1},
    {3,11,1,1,4,9,11,4,1,11,6,4,-1,-1,-1,-1}, {6,4,9,6,9,11,11,9,1,11,1,0,11,0,8,-1}, {11,0,3,11,6,0,0,6,4,-1,-1,-1,-1,-1,-1,-1}, {8,11,6,8,6,4,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {6,7,8,6,8,10,10,8,9,-1,-1,-1,-1,-1,-1,-1}, {3,0,7,7,10,6,0,10,7,0,9,10,-1,-1,-1,-1}, {1,10,6,1,6,7,1,7,0,0,7,8,-1,-1,-1,-1}, {6,1,10,6,7,1,1,7,3,-1,-1,-1,-1,-1,-1,-1},
    {9,1,8,8,6,7,8,1,6,6,1,2,-1,-1,-1,-1}, {7,3,0,7,0,6,6,0,9,6,9,1,6,1,2,-1}, {8,6,7,8,0,6,6,0,2,-1,-1,-1,-1,-1,-1,-1}, {2,6,7,2,7,3,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {11,2,3,6,7,8,6,8,10,10,8,9,-1,-1,-1,-1}, {9,10,6,9,6,0,0,6,7,0,7,11,0,11,2,-1}, {3,11,2,0,7,8,0,1,7,7,1,6,6,1,10,-1}, {6,7,10,7,1,10,7,2,1,7,11,2,-1,-1,-1,-1},
    {1,3,11,1,11,9,9,11,6,9,6,7,9,7,8,-1}, {6,7,11,9,1,0,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {8,0,7,0,6,7,0,11,6,0,3,11,-1,-1,-1,-1}, {6,7,11,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {6,11,7,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {3,0,8,11,7,6,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {6,11,7,9,0,1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {1,8,3,1,9,8,7,6,11,-1,-1,-1,-1,-1,-1,-1},
    {11,7,6,2,10,1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {1,2,10,0,8,3,11,7,6,-1,-1,-1,-1,-1,-1,-1}, {9,2,10,9,0,2,11,7,6,-1,-1,-1,-1,-1,-1,-1}, {11,7,6,3,2,10,3,10,8,8,10,9,-1,-1,-1,-1},
    {2,7,6,2,3,7,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {8,7,6,8,6,0,0,6,2,-1,-1,-1,-1,-1,-1,-1}, {7,2,3,7,6,2,1,9,0,-1,-1,-1,-1,-1,-1,-1}, {8,7,9,9,2,1,9,7,2,2,7,6,-1,-1,-1,-1},
    {6,10,1,6,1,7,7,1,3,-1,-1,-1,-1,-1,-1,-1}, {6,10,1,6,1,0,6,0,7,7,0,8,-1,-1,-1,-1}, {7,6,3,3,9,0,6,9,3,6,10,9,-1,-1,-1,-1}, {6,8,7,6,10,8,8,10,9,-1,-1,-1,-1,-1,-1,-1},
    {8,6,11,8,4,6,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {11,3,0,11,0,6,6,0,4,-1,-1,-1,-1,-1,-1,-1}, {6,8,4,6,11,8,0,1,9,-1,-1,-1,-1,-1,-1,-1}, {1,9,3,3,6,11,9,6,3,9,4,6,-1,-1,-1,-1},
    {8,6,11,8,4,6,10,1,2,-1,-1,-1,-1,-1,-1,-1}, {2,10,1,11,3,0,11,0,6,6,0,4,-1,-1,-1,-1}, {11,4,6,11,8,4,2,10,9,2,9,0,-1,-1,-1,-1}, {4,6,11,4,11,9,9,11,3,9,3,2,9,2,10,-1},
    {3,8,4,3,4,2,2,4,6,-1,-1,-1,-1,-1,-1,-1}, {2,0,4,2,4,6,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {0,1,9,3,8,4,3,4,2,2,4,6,-1,-1,-1,-1}, {9,2,1,9,4,2,2,4,6,-1,-1,-1,-1,-1,-1,-1},
    {6,10,4,4,3,8,4,10,3,3,10,1,-1,-1,-1,-1}, {1,6,10,1,0,6,6,0,4,-1,-1,-1,-1,-1,-1,-1}, {10,9,0,10,0,6,6,0,3,6,3,8,6,8,4,-1}, {10,9,4,10,4,6,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {6,11,7,5,4,9,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {0,8,3,9,5,4,7,6,11,-1,-1,-1,-1,-1,-1,-1}, {0,5,4,0,1,5,6,11,7,-1,-1,-1,-1,-1,-1,-1}, {7,6,11,4,8,3,4,3,5,5,3,1,-1,-1,-1,-1},
    {2,10,1,11,7,6,5,4,9,-1,-1,-1,-1,-1,-1,-1}, {0,8,3,1,2,10,4,9,5,11,7,6,-1,-1,-1,-1}, {6,11,7,10,5,4,10,4,2,2,4,0,-1,-1,-1,-1}, {6,11,7,5,2,10,5,4,2,2,4,3,3,4,8,-1},
    {2,7,6,2,3,7,4,9,5,-1,-1,-1,-1,-1,-1,-1}, {4,9,5,8,7,6,8,6,0,0,6,2,-1,-1,-1,-1}, {3,6,2,3,7,6,0,1,5,0,5,4,-1,-1,-1,-1}, {1,5,4,1,4,2,2,4,8,2,8,7,2,7,6,-1},
    {5,4,9,6,10,1,6,1,7,7,1,3,-1,-1,-1,-1}, {4,9,5,7,0,8,7,6,0,0,6,1,1,6,10,-1}, {3,7,6,3,6,0,0,6,10,0,10,5,0,5,4,-1}, {4,8,5,8,10,5,8,6,10,8,7,6,-1,-1,-1,-1},
    {5,6,11,5,11,9,9,11,8,-1,-1,-1,-1,-1,-1,-1}, {0,9,5,0,5,6,0,6,3,3,6,11,-1,-1,-1,-1}, {8,0,11,11,5,6,11,0,5,5,0,1,-1,-1,-1,-1}, {11,5,6,11,3,5,5,3,1,-1,-1,-1,-1,-1,-1,-1},
    {10,1,2,5,6,11,5,11,9,9,11,8,-1,-1,-1,-1}, {2,10,1,3,6,11,3,0,6,6,0,5,5,0,9,-1}, {0,2,10,0,10,8,8,10,5,8,5,6,8,6,11,-1}, {11,3,6,3,5,6,3,10,5,3,2,10,-1,-1,-1,-1},
    {2,3,6,6,9,5,3,9,6,3,8,9,-1,-1,-1,-1}, {5,0,9,5,6,0,0,6,2,-1,-1,-1,-1,-1,-1,-1}, {6,2,3,6,3,5,5,3,8,5,8,0,5,0,1,-1}, {6,2,1,6,1,5,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {8,9,5,8,5,3,3,5,6,3,6,10,3,10,1,-1}, {1,0,10,0,6,10,0,5,6,0,9,5,-1,-1,-1,-1}, {0,3,8,10,5,6,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {10,5,6,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {11,5,10,11,7,5,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {5,11,7,5,10,11,3,0,8,-1,-1,-1,-1,-1,-1,-1}, {11,5,10,11,7,5,9,0,1,-1,-1,-1,-1,-1,-1,-1}, {9,3,1,9,8,3,5,10,11,5,11,7,-1,-1,-1,-1},
    {2,11,7,2,7,1,1,7,5,-1,-1,-1,-1,-1,-1,-1}, {3,0,8,2,11,7,2,7,1,1,7,5,-1,-1,-1,-1}, {2,11,0,0,5,9,0,11,5,5,11,7,-1,-1,-1,-1}, {9,8,3,9,3,5,5,3,2,5,2,11,5,11,7,-1},
    {10,2,3,10,3,5,5,3,7,-1,-1,-1,-1,-1,-1,-1}, {5,10,7,7,0,8,10,0,7,10,2,0,-1,-1,-1,-1}, {1,9,0,10,2,3,10,3,5,5,3,7,-1,-1,-1,-1}, {7,5,10,7,10,8,8,10,2,8,2,1,8,1,9,-1},
    {7,5,1,7,1,3,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {8,1,0,8,7,1,1,7,5,-1,-1,-1,-1,-1,-1,-1}, {0,5,9,0,3,5,5,3,7,-1,-1,-1,-1,-1,-1,-1}, {7,5,9,7,9,8,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {4,5,10,4,10,8,8,10,11,-1,-1,-1,-1,-1,-1,-1}, {11,3,10,10,4,5,10,3,4,4,3,0,-1,-1,-1,-1}, {9,0,1,4,5,10,4,10,8,8,10,11,-1,-1,-1,-1}, {3,1,9,3,9,11,11,9,4,11,4,5,11,5,10,-1},
    {8,4,11,11,1,2,4,1,11,4,5,1,-1,-1,-1,-1}, {5,1,2,5,2,4,4,2,11,4,11,3,4,3,0,-1}, {11,8,4,11,4,2,2,4,5,2,5,9,2,9,0,-1}, {2,11,3,5,9,4,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {4,5,10,4,10,2,4,2,8,8,2,3,-1,-1,-1,-1}, {10,4,5,10,2,4,4,2,0,-1,-1,-1,-1,-1,-1,-1}, {0,1,9,8,2,3,8,4,2,2,4,10,10,4,5,-1}, {10,2,5,2,4,5,2,9,4,2,1,9,-1,-1,-1,-1},
    {4,3,8,4,5,3,3,5,1,-1,-1,-1,-1,-1,-1,-1}, {0,4,5,0,5,1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {0,3,9,3,5,9,3,4,5,3,8,4,-1,-1,-1,-1}, {4,5,9,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {7,4,9,7,9,11,11,9,10,-1,-1,-1,-1,-1,-1,-1}, {8,3,0,7,4,9,7,9,11,11,9,10,-1,-1,-1,-1}, {0,1,4,4,11,7,1,11,4,1,10,11,-1,-1,-1,-1}, {10,11,7,10,7,1,1,7,4,1,4,8,1,8,3,-1},
    {2,11,7,2,7,4,2,4,1,1,4,9,-1,-1,-1,-1}, {0,8,3,1,4,9,1,2,4,4,2,7,7,2,11,-1}, {7,2,11,7,4,2,2,4,0,-1,-1,-1,-1,-1,-1,-1}, {7,4,11,4,2,11,4,3,2,4,8,3,-1,-1,-1,-1},
    {7,4,3,3,10,2,3,4,10,10,4,9,-1,-1,-1,-1}, {2,0,8,2,8,10,10,8,7,10,7,4,10,4,9,-1}, {4,0,1,4,1,7,7,1,10,7,10,2,7,2,3,-1}, {4,8,7,1,10,2,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {9,7,4,9,1,7,7,1,3,-1,-1,-1,-1,-1,-1,-1}, {8,7,0,7,1,0,7,9,1,7,4,9,-1,-1,-1,-1}, {4,0,3,4,3,7,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {4,8,7,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {8,9,10,8,10,11,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {0,11,3,0,9,11,11,9,10,-1,-1,-1,-1,-1,-1,-1}, {1,8,0,1,10,8,8,10,11,-1,-1,-1,-1,-1,-1,-1}, {3,1,10,3,10,11,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {2,9,1,2,11,9,9,11,8,-1,-1,-1,-1,-1,-1,-1}, {0,9,3,9,11,3,9,2,11,9,1,2,-1,-1,-1,-1}, {11,8,0,11,0,2,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {2,11,3,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {3,10,2,3,8,10,10,8,9,-1,-1,-1,-1,-1,-1,-1}, {9,10,2,9,2,0,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {3,8,2,8,10,2,8,1,10,8,0,1,-1,-1,-1,-1}, {2,1,10,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
    {8,9,1,8,1,3,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {1,0,9,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {0,3,8,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1}, {-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1},
};

// Shared cell processor so the dense and coarse-to-fine passes produce
// byte-identical meshes: vertices weld on global lattice edges and the lerp
// runs in canonical low-to-high edge order, independent of the visiting cell.
struct CellEmitter {
  CellEmitter(int nx, int ny, const Vec3& origin, double cell, double iso)
      : nx1_(nx + 1), ny1_(ny + 1), origin_(origin), cell_(cell), iso_(iso) {}

  void emit(int cx, int cy, int cz, const double v[8]) {
    int idx = 0;
    for (int c = 0; c < 8; ++c)
      if (v[c] <= iso_) idx |= 1 << c;
    const int8_t* tri = kTriTable[idx];
    for (int t = 0; tri[t] != -1; t += 3) {
      const int i0 = vertex_on_edge(cx, cy, cz, tri[t], v);
      const int i1 = vertex_on_edge(cx, cy, cz, tri[t + 1], v);
      const int i2 = vertex_on_edge(cx, cy, cz, tri[t + 2], v);
      // Corner-welded vertices collapse triangles around lattice points that
      // sit exactly on the surface; those have zero area and pinch topology.
      if (i0 == i1 || i1 == i2 || i0 == i2) continue;
      // The table winds toward the at-or-below side; flipped here so faces
      // point outward for negative-inside fields.
      mesh.faces.emplace_back(i0, i2, i1);
    }
  }

  TriangleMesh mesh;

 private:
  int vertex_on_edge(int cx, int cy, int cz, int e, const double v[8]) {
    int a = kEdgeVerts[e][0];
    int b = kEdgeVerts[e][1];
    int axis = 0;
    while (kCorner[a][axis] == kCorner[b][axis]) ++axis;
    if (kCorner[a][axis] > kCorner[b][axis]) std::swap(a, b);
    int gx = cx + kCorner[a][0];
    int gy = cy + kCorner[a][1];
    int gz = cz + kCorner[a][2];

    // Crossings within 1e-9 of a lattice point (sub-picometre at any sane
    // cell size) snap onto it and weld by corner, so a surface grazing the
    // lattice yields one shared vertex instead of a ring of slivers; the
    // collapsed triangles drop out via the repeated-index filter.
    const double fa = v[a];
    const double fb = v[b];
    double t = (iso_ - fa) / (fb - fa);  // fb != fa on a crossing edge
    constexpr double kSnap = 1e-9;
    if (t >= 1.0 - kSnap) {
      t = 1.0;
      gx += axis == 0;
      gy += axis == 1;
      gz += axis == 2;
    } else if (t <= kSnap) {
      t = 0.0;
    }
    const uint64_t point = (uint64_t(gz) * ny1_ + gy) * nx1_ + gx;
    const uint64_t key = point * 4 + (t == 0.0 || t == 1.0 ? 3 : axis);
    auto it = edge_vertex_.find(key);
    if (it != edge_vertex_.end()) return it->second;

    Vec3 p(origin_.x() + cell_ * gx, origin_.y() + cell_ * gy,
           origin_.z() + cell_ * gz);
    if (t != 0.0 && t != 1.0) p[axis] += cell_ * t;
    const int id = int(mesh.vertices.size());
    mesh.vertices.push_back(p);
    edge_vertex_.emplace(key, id);
    return id;
  }

  int nx1_, ny1_;
  Vec3 origin_;
  double cell_, iso_;
  std::unordered_map<uint64_t, int> edge_vertex_;
};

// Batched field evaluation in the extraction frame.
void eval_points(const DistanceField& field, const std::vector<Vec3>& pts,
                 std::vector<double>& out) {
  constexpr size_t kChunk = 16384;
  out.resize(pts.size());
  Pose identity;
  VecX vals;
  std::vector<Vec3> chunk;
  for (size_t at = 0; at < pts.size(); at += kChunk) {
    const size_t n = std::min(kChunk, pts.size() - at);
    chunk.assign(pts.begin() + at, pts.begin() + at + n);
    field.eval(identity, chunk, vals, nullptr);
    for (size_t i = 0; i < n; ++i) out[at + i] = vals[int(i)];
  }
}

}  // namespace

void ExtractConfig::validate() const {
  require(resolution >= 1, "ExtractConfig: resolution must be positive");
  require(slope_margin > 0.0, "ExtractConfig: slope_margin must be positive");
  require(std::isfinite(iso), "ExtractConfig: iso must be finite");
}

TriangleMesh marching_cubes(const std::vector<double>& values, int nx, int ny,
                            int nz, const Vec3& origin, double cell,
                            double iso) {
  require(nx >= 1 && ny >= 1 && nz >= 1, "marching_cubes: need >= 1 cell");
  require(cell > 0.0, "marching_cubes: cell must be positive");
  const size_t want = size_t(nx + 1) * (ny + 1) * (nz + 1);
  require(values.size() == want, "marching_cubes: lattice size mismatch");

  const auto at = [&](int x, int y, int z) {
    return values[(size_t(z) * (ny + 1) + y) * (nx + 1) + x];
  };
  CellEmitter em(nx, ny, origin, cell, iso);
  double v[8];
  for (int cz = 0; cz < nz; ++cz)
    for (int cy = 0; cy < ny; ++cy)
      for (int cx = 0; cx < nx; ++cx) {
        for (int c = 0; c < 8; ++c)
          v[c] = at(cx + kCorner[c][0], cy + kCorner[c][1],
                    cz + kCorner[c][2]);
        em.emit(cx, cy, cz, v);
      }
  return std::move(em.mesh);
}

TriangleMesh extract_mesh(const DistanceField& field, const Vec3& bound_center,
                          double bound_side, const ExtractConfig& cfg) {
  cfg.validate();
  require(bound_side > 0.0, "extract_mesh: bound_side must be positive");
  const int n = cfg.resolution;
  const double cell = bound_side / n;
  const Vec3 origin = bound_center - 0.5 * bound_side * Vec3::Ones();
  const auto lattice_point = [&](int gx, int gy, int gz) {
    return Vec3(origin.x() + cell * gx, origin.y() + cell * gy,
                origin.z() + cell * gz);
  };

  TriangleMesh mesh;
  if (cfg.block <= 1) {
    std::vector<Vec3> pts;
    pts.reserve(size_t(n + 1) * (n + 1) * (n + 1));
    for (int gz = 0; gz <= n; ++gz)
      for (int gy = 0; gy <= n; ++gy)
        for (int gx = 0; gx <= n; ++gx) pts.push_back(lattice_point(gx, gy, gz));
    std::vector<double> vals;
    eval_points(field, pts, vals);
    mesh = marching_cubes(vals, n, n, n, origin, cell, cfg.iso);
  } else {
    const int B = cfg.block;
    const int nb = (n + B - 1) / B;
    const auto block_id = [&](int bx, int by, int bz) {
      return (bz * nb + by) * nb + bx;
    };

    // Coarse corner lattice; clipped edge blocks reuse the boundary plane.
    std::vector<Vec3> coarse_pts;
    coarse_pts.reserve(size_t(nb + 1) * (nb + 1) * (nb + 1));
    for (int bz = 0; bz <= nb; ++bz)
      for (int by = 0; by <= nb; ++by)
        for (int bx = 0; bx <= nb; ++bx)
          coarse_pts.push_back(lattice_point(std::min(bx * B, n),
                                             std::min(by * B, n),
                                             std::min(bz * B, n)));
    std::vector<double> coarse;
    eval_points(field, coarse_pts, coarse);
    const auto coarse_at = [&](int bx, int by, int bz) {
      return coarse[(size_t(bz) * (nb + 1) + by) * (nb + 1) + bx];
    };

    const double thresh = cfg.slope_margin * 0.5 * std::sqrt(3.0) * B * cell;
    std::vector<uint8_t> refine(size_t(nb) * nb * nb, 0);
    std::vector<Vec3> fine_pts;
    std::vector<std::pair<int, int>> fine_slot;  // block id, local index
    std::vector<std::vector<double>> block_vals(refine.size());
    for (int bz = 0; bz < nb; ++bz)
      for (int by = 0; by < nb; ++by)
        for (int bx = 0; bx < nb; ++bx) {
          double best = std::abs(coarse_at(bx, by, bz) - cfg.iso);
          for (int c = 1; c < 8; ++c)
            best = std::min(best,
                            std::abs(coarse_at(bx + kCorner[c][0],
                                               by + kCorner[c][1],
                                               bz + kCorner[c][2]) -
                                     cfg.iso));
          if (best > thresh) continue;
          const int id = block_id(bx, by, bz);
          refine[id] = 1;
          const int lx = std::min(B, n - bx * B);
          const int ly = std::min(B, n - by * B);
          const int lz = std::min(B, n - bz * B);
          block_vals[id].resize(size_t(lx + 1) * (ly + 1) * (lz + 1));
          for (int z = 0; z <= lz; ++z)
            for (int y = 0; y <= ly; ++y)
              for (int x = 0; x <= lx; ++x) {
                fine_pts.push_back(
                    lattice_point(bx * B + x, by * B + y, bz * B + z));
                fine_slot.emplace_back(id,
                                       (z * (ly + 1) + y) * (lx + 1) + x);
              }
        }
    std::vector<double> fine;
    eval_points(field, fine_pts, fine);
    for (size_t i = 0; i < fine.size(); ++i)
      block_vals[fine_slot[i].first][fine_slot[i].second] = fine[i];

    // Same global cell order as the dense pass so vertex ids line up.
    CellEmitter em(n, n, origin, cell, cfg.iso);
    double v[8];
    for (int cz = 0; cz < n; ++cz)
      for (int cy = 0; cy < n; ++cy)
        for (int cx = 0; cx < n; ++cx) {
          const int bx = cx / B, by = cy / B, bz = cz / B;
          const int id = block_id(bx, by, bz);
          if (!refine[id]) continue;
          const int lx = std::min(B, n - bx * B);
          const int ly = std::min(B, n - by * B);
          const std::vector<double>& bv = block_vals[id];
          for (int c = 0; c < 8; ++c) {
            const int x = cx + kCorner[c][0] - bx * B;
            const int y = cy + kCorner[c][1] - by * B;
            const int z = cz + kCorner[c][2] - bz * B;
            v[c] = bv[(size_t(z) * (ly + 1) + y) * (lx + 1) + x];
          }
          em.emit(cx, cy, cz, v);
        }
    mesh = std::move(em.mesh);
  }

  if (mesh.faces.empty())
    throw EmptySurface("extract_mesh: field never crosses the iso level");
  if (cfg.largest_component_only) mesh = largest_component(mesh);
  return mesh;
}

TriangleMesh largest_component(const TriangleMesh& mesh) {
  if (mesh.faces.empty()) return mesh;
  std::vector<int> parent(mesh.vertices.size());
  for (size_t i = 0; i < parent.size(); ++i) parent[i] = int(i);
  const auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const Eigen::Vector3i& f : mesh.faces) {
    const int r = find(f[0]);
    parent[find(f[1])] = r;
    parent[find(f[2])] = r;
  }

  std::unordered_map<int, double> area;
  for (const Eigen::Vector3i& f : mesh.faces) {
    const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    area[find(f[0])] += 0.5 * e1.cross(e2).norm();
  }
  int best = -1;
  for (const auto& [root, a] : area)
    if (best < 0 || a > area[best] || (a == area[best] && root < best))
      best = root;

  TriangleMesh out;
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (const Eigen::Vector3i& f : mesh.faces) {
    if (find(f[0]) != best) continue;
    Eigen::Vector3i g;
    for (int k = 0; k < 3; ++k) {
      int& slot = remap[f[k]];
      if (slot < 0) {
        slot = int(out.vertices.size());
        out.vertices.push_back(mesh.vertices[f[k]]);
      }
      g[k] = slot;
    }
    out.faces.push_back(g);
  }
  return out;
}

int euler_characteristic(const TriangleMesh& mesh) {
  std::unordered_set<int> verts;
  std::unordered_set<uint64_t> edges;
  for (const Eigen::Vector3i& f : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      verts.insert(f[k]);
      const uint64_t a = std::min(f[k], f[(k + 1) % 3]);
      const uint64_t b = std::max(f[k], f[(k + 1) % 3]);
      edges.insert((a << 32) | b);
    }
  return int(verts.size()) - int(edges.size()) + int(mesh.faces.size());
}

}  // namespace vtsdf
