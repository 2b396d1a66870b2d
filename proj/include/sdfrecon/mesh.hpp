#pragma once

#include <array>
#include <string>
#include <vector>

#include "sdfrecon/grid.hpp"
#include "sdfrecon/vec.hpp"

namespace sdfrecon {

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    bool empty() const { return triangles.empty(); }
};

// Zero level set of the smoothed SDF via standard 256-case marching cubes with
// linear edge interpolation. Cells are spanned by 2x2x2 voxel centers; only
// cells whose corners all lie in allocated tiles are polygonized, so the
// far-field constant never fabricates surface. Shared edge vertices are
// deduplicated; zero-area triangles are dropped.
TriMesh marching_cubes(const SparseGrid& grid);

// As above but over an arbitrary dense field: values[(x*ny + y)*nz + z] sampled
// at points origin + (x,y,z)*spacing.
TriMesh marching_cubes_field(const std::vector<double>& values, int nx, int ny, int nz,
                             const Vec3& origin, double spacing);

void save_ply(const std::string& path, const TriMesh& mesh);
void save_obj(const std::string& path, const TriMesh& mesh);
TriMesh load_ply(const std::string& path);

} // namespace sdfrecon
