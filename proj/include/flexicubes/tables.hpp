#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace flexi {

// Canonical cube numbering used everywhere in this library.
//
// Corners: i in [0,8), position (i&1, (i>>1)&1, (i>>2)&1).
// Edges:   x-edges 0..3 (id = y + 2z), y-edges 4..7 (id = 4 + x + 2z),
//          z-edges 8..11 (id = 8 + x + 2y).
// Faces:   id = 2*axis + side,  side 0 = low, 1 = high
//          (0:-x, 1:+x, 2:-y, 3:+y, 4:-z, 5:+z).
namespace cube {

inline constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0},
                                      {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};

inline constexpr int kEdgeCorner[12][2] = {{0, 1}, {2, 3}, {4, 5}, {6, 7},   // x
                                           {0, 2}, {1, 3}, {4, 6}, {5, 7},   // y
                                           {0, 4}, {1, 5}, {2, 6}, {3, 7}};  // z

inline constexpr int kEdgeAxis[12] = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};

// corners of each face (unordered set semantics; stored in lexicographic corner order)
inline constexpr int kFaceCorner[6][4] = {{0, 2, 4, 6}, {1, 3, 5, 7}, {0, 1, 4, 5},
                                          {2, 3, 6, 7}, {0, 1, 2, 3}, {4, 5, 6, 7}};

// edges of each face
inline constexpr int kFaceEdge[6][4] = {{4, 6, 8, 10}, {5, 7, 9, 11}, {0, 2, 8, 9},
                                        {1, 3, 10, 11}, {0, 1, 4, 5}, {2, 3, 6, 7}};

// the two faces incident to each edge
inline constexpr int kEdgeFace[12][2] = {{2, 4}, {3, 4}, {2, 5}, {3, 5}, {0, 4}, {1, 4},
                                         {0, 5}, {1, 5}, {0, 2}, {1, 2}, {0, 3}, {1, 3}};

inline int face_axis(int f) { return f >> 1; }
inline int face_side(int f) { return f & 1; }

}  // namespace cube

// One sign configuration: the primal-face loops of the cell. Each loop is a
// simple cycle of cell-edge ids, stored in an orientation whose winding faces
// the positive (outside) region.
struct CubeCase {
    std::vector<std::vector<int>> loops;
    std::array<int8_t, 12> edge_loop;  // loop index containing each edge, -1 if uncut

    int num_loops() const { return (int)loops.size(); }
};

// The 256-entry case table plus the manifoldness patch data.
//
// A face of a configuration is "ambiguous" when all four of its edges are cut
// (diagonally alternating corner signs). The deterministic pairing rule keeps
// adjacent cells consistent, but for some configurations a single loop crosses
// an ambiguous face twice (a "tunnel"). When two such cells meet at that face
// the stitched mesh would gain a non-manifold edge; extraction then switches
// both cells to the variant traced with the opposite pairing on that face.
struct DmcTables {
    std::array<CubeCase, 256> base;
    std::array<uint8_t, 256> ambiguous_faces;  // bitmask over face ids
    std::array<uint8_t, 256> tunnel_faces;     // bitmask over face ids (default trace)
    // Variants re-traced with the pairing flipped on a subset of tunnel faces,
    // keyed by that subset. The empty subset maps to `base`.
    std::array<std::vector<std::pair<uint8_t, CubeCase>>, 256> variants;

    const CubeCase& lookup(uint8_t mask) const { return base[mask]; }
    const CubeCase& lookup_variant(uint8_t mask, uint8_t flip_mask) const;

    std::string dump_json() const;
};

// Builds the tables by tracing cut-polygon loops on each of the 256 sign
// configurations. Throws std::runtime_error if any internal consistency check
// fails (loop closure, coverage, orientation, complement symmetry).
DmcTables build_tables();

// Shared instance (built once, immutable afterwards).
const DmcTables& dmc_tables();

}  // namespace flexi
