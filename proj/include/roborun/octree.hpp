#pragma once

#include "roborun/geometry.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace roborun {

enum class Occupancy : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

const char* occupancy_name(Occupancy s);

/// Integer voxel coordinates at the finest level (vox_min).
struct VoxelKey {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    std::uint32_t z = 0;

    VoxelKey at_level(int level) const {
        return {x >> level, y >> level, z >> level};
    }
    std::uint64_t packed() const {
        return (static_cast<std::uint64_t>(x) << 42) | (static_cast<std::uint64_t>(y) << 21) |
               static_cast<std::uint64_t>(z);
    }
    bool operator==(const VoxelKey&) const = default;
};

/// Ternary multi-resolution occupancy octree.
///
/// Level 0 holds vox_min voxels; level `depth()` is the root. A node at level l
/// has side vox_min * 2^l. Internal nodes cache which leaf states occur below
/// them, so a node can be read at any level in O(depth):
///   Occupied if any descendant is Occupied, Free if all descendants are Free,
///   Unknown otherwise.
///
/// Write rules (static worlds, safety biased):
///   - mark_occupied collapses the node to an Occupied leaf.
///   - mark_free turns Unknown leaves Free and never clears an Occupied leaf
///     observed at its own size. A coarser Occupied leaf on the path is split and
///     only the observed child is cleared; the other children keep Occupied as
///     inherited state, which a later free observation at their size may clear.
class OccupancyTree {
public:
    static constexpr int kPrecisionLevels = 6;

    OccupancyTree() = default;
    OccupancyTree(Vec3 origin, double vox_min, int depth);

    /// Tree whose root covers `arena` (plus sensor overshoot) with `altitude`
    /// centered inside a finest voxel.
    static OccupancyTree for_arena(const Aabb& arena, double altitude, double vox_min,
                                   double margin);

    const Vec3& origin() const { return origin_; }
    double vox_min() const { return vox_min_; }
    int depth() const { return depth_; }
    double root_size() const { return size_at(depth_); }
    double size_at(int level) const { return vox_min_ * static_cast<double>(1u << level); }

    /// Ladder level for a precision; throws unless it is vox_min * 2^n with n <= depth.
    int level_for(double precision) const;
    /// The admissible precisions vox_min * 2^n, n < kPrecisionLevels.
    std::vector<double> precision_ladder() const;

    bool key_of(const Vec3& p, VoxelKey& key) const;
    Vec3 center_of(const VoxelKey& key_at_level, int level) const;
    Aabb bounds() const;

    Occupancy query(const Vec3& p, double at_precision) const;
    Occupancy query_level(const Vec3& p, int level) const;
    Occupancy query_key(const VoxelKey& key_at_level, int level) const;

    /// Write rules documented above. `key_at_level` is already shifted to `level`.
    void mark_free(const VoxelKey& key_at_level, int level);
    void mark_occupied(const VoxelKey& key_at_level, int level);
    /// Unconditional overwrite of a node with a leaf state (view construction).
    void set_node(const VoxelKey& key_at_level, int level, Occupancy state);

    /// Copy of the tree in which no leaf is finer than `level`.
    OccupancyTree collapsed_copy(int level) const;

    struct NodeRef {
        VoxelKey key;  // at `level`
        int level;
        Occupancy state;  // aggregated
    };
    /// Visits every node at `level` whose subtree holds any known leaf, plus
    /// known leaves coarser than `level`.
    void visit_known_at_level(int level, const std::function<void(const NodeRef&)>& fn) const;
    /// Visits every explicit leaf (including Unknown leaves created by splits).
    void visit_leaves(const std::function<void(const NodeRef&)>& fn) const;

    std::size_t leaf_count() const;
    std::size_t leaf_count(Occupancy state) const;
    /// Sum of leaf volumes over Free and Occupied leaves.
    double known_volume() const { return known_volume_; }
    bool has_occupied() const;
    Aabb known_bounds() const;

    /// Distance from p to the nearest Occupied leaf, measured center-to-p minus
    /// half the leaf size and clamped at 0; +inf when no Occupied leaf exists.
    double nearest_occupied_distance(const Vec3& p) const;

    /// Structural hash; equal trees hash equal.
    std::uint64_t hash() const;

    void write_leaves_csv(std::ostream& os) const;

private:
    struct Node {
        std::int32_t children = -1;  // index of the first of 8 contiguous children
        Occupancy state = Occupancy::Unknown;
        std::uint8_t flags = kUnknownBit;
        // Occupied only because a coarser Occupied leaf was split; a free ray may clear it
        bool inherited = false;
    };
    static constexpr std::uint8_t kFreeBit = 1;
    static constexpr std::uint8_t kOccBit = 2;
    static constexpr std::uint8_t kUnknownBit = 4;

    static std::uint8_t bit_of(Occupancy s) {
        return s == Occupancy::Free ? kFreeBit : s == Occupancy::Occupied ? kOccBit : kUnknownBit;
    }
    static Occupancy aggregate(std::uint8_t flags) {
        if (flags & kOccBit) return Occupancy::Occupied;
        if (flags == kFreeBit) return Occupancy::Free;
        return Occupancy::Unknown;
    }
    static int child_slot(const VoxelKey& key_at_level, int child_level, int level) {
        const int shift = child_level - level;
        return static_cast<int>(((key_at_level.x >> shift) & 1u) |
                                (((key_at_level.y >> shift) & 1u) << 1) |
                                (((key_at_level.z >> shift) & 1u) << 2));
    }

    double leaf_volume(int level) const {
        const double s = size_at(level);
        return s * s * s;
    }
    bool in_range(const VoxelKey& key_at_level, int level) const;
    std::int32_t alloc_children(Occupancy state, std::uint8_t flags);
    void release_subtree(std::int32_t node, int level);
    void split(std::int32_t node);
    void collapse_to(std::int32_t node, int level, Occupancy state);
    void free_subtree(std::int32_t node, int level);
    void refresh_flags(std::int32_t node);
    std::int32_t descend_to(const VoxelKey& key_at_level, int level, std::vector<std::int32_t>& path,
                            bool& carved);
    void refresh_path(const std::vector<std::int32_t>& path);

    Vec3 origin_;
    double vox_min_ = 0.3;
    int depth_ = 0;
    std::vector<Node> nodes_;
    std::vector<std::int32_t> free_blocks_;
    double known_volume_ = 0.0;
    std::vector<std::int32_t> scratch_path_;
};

}  // namespace roborun
