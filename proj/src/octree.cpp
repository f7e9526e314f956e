#include "roborun/octree.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace roborun {

const char* occupancy_name(Occupancy s) {
    switch (s) {
        case Occupancy::Unknown: return "unknown";
        case Occupancy::Free: return "free";
        case Occupancy::Occupied: return "occupied";
    }
    return "?";
}

OccupancyTree::OccupancyTree(Vec3 origin, double vox_min, int depth)
    : origin_(origin), vox_min_(vox_min), depth_(depth) {
    if (!(vox_min > 0.0)) throw std::invalid_argument("vox_min must be positive");
    if (depth < kPrecisionLevels - 1 || depth > 20)
        throw std::invalid_argument("tree depth must cover the precision ladder and fit 21-bit keys");
    nodes_.push_back(Node{});
}

OccupancyTree OccupancyTree::for_arena(const Aabb& arena, double altitude, double vox_min,
                                       double margin) {
    const Vec3 ext = arena.extent();
    const double need = std::max({ext.x, ext.y, ext.z}) + 2.0 * margin;
    int depth = kPrecisionLevels - 1;
    while (vox_min * static_cast<double>(1u << depth) < need) ++depth;
    const double root = vox_min * static_cast<double>(1u << depth);
    const Vec3 c = arena.center();
    const double half_cells = static_cast<double>(1u << (depth - 1));
    Vec3 origin{c.x - root / 2.0, c.y - root / 2.0, altitude - vox_min * (half_cells + 0.5)};
    return OccupancyTree(origin, vox_min, depth);
}

int OccupancyTree::level_for(double precision) const {
    const double ratio = precision / vox_min_;
    const double lg = std::log2(ratio);
    const long n = std::lround(lg);
    if (!(ratio > 0.0) || std::abs(lg - static_cast<double>(n)) > 1e-9 || n < 0 || n > depth_)
        throw std::invalid_argument("precision " + std::to_string(precision) +
                                    " is not vox_min * 2^n within the tree");
    return static_cast<int>(n);
}

std::vector<double> OccupancyTree::precision_ladder() const {
    std::vector<double> out;
    for (int n = 0; n < kPrecisionLevels; ++n) out.push_back(size_at(n));
    return out;
}

bool OccupancyTree::key_of(const Vec3& p, VoxelKey& key) const {
    const double lim = static_cast<double>(1u << depth_);
    const double fx = std::floor((p.x - origin_.x) / vox_min_);
    const double fy = std::floor((p.y - origin_.y) / vox_min_);
    const double fz = std::floor((p.z - origin_.z) / vox_min_);
    if (!(fx >= 0.0 && fy >= 0.0 && fz >= 0.0 && fx < lim && fy < lim && fz < lim)) return false;
    key = {static_cast<std::uint32_t>(fx), static_cast<std::uint32_t>(fy),
           static_cast<std::uint32_t>(fz)};
    return true;
}

Vec3 OccupancyTree::center_of(const VoxelKey& k, int level) const {
    const double s = size_at(level);
    return origin_ + Vec3{(k.x + 0.5) * s, (k.y + 0.5) * s, (k.z + 0.5) * s};
}

Aabb OccupancyTree::bounds() const {
    const double r = root_size();
    return {origin_, origin_ + Vec3{r, r, r}};
}

bool OccupancyTree::in_range(const VoxelKey& k, int level) const {
    if (level < 0 || level > depth_) return false;
    const std::uint32_t lim = 1u << (depth_ - level);
    return k.x < lim && k.y < lim && k.z < lim;
}

std::int32_t OccupancyTree::alloc_children(Occupancy state, std::uint8_t flags) {
    std::int32_t block;
    if (!free_blocks_.empty()) {
        block = free_blocks_.back();
        free_blocks_.pop_back();
    } else {
        block = static_cast<std::int32_t>(nodes_.size());
        nodes_.resize(nodes_.size() + 8);
    }
    for (int i = 0; i < 8; ++i) nodes_[block + i] = Node{-1, state, flags, state == Occupancy::Occupied};
    return block;
}

void OccupancyTree::release_subtree(std::int32_t block, int child_level) {
    for (int i = 0; i < 8; ++i) {
        const Node n = nodes_[block + i];
        if (n.children >= 0)
            release_subtree(n.children, child_level - 1);
        else if (n.state != Occupancy::Unknown)
            known_volume_ -= leaf_volume(child_level);
    }
    free_blocks_.push_back(block);
}

void OccupancyTree::split(std::int32_t node) {
    const Occupancy s = nodes_[node].state;
    const std::int32_t block = alloc_children(s, bit_of(s));
    nodes_[node].children = block;
}

void OccupancyTree::collapse_to(std::int32_t node, int level, Occupancy state) {
    if (nodes_[node].children >= 0) {
        release_subtree(nodes_[node].children, level - 1);
        nodes_[node].children = -1;
    } else if (nodes_[node].state != Occupancy::Unknown) {
        known_volume_ -= leaf_volume(level);
    }
    nodes_[node].state = state;
    nodes_[node].flags = bit_of(state);
    nodes_[node].inherited = false;
    if (state != Occupancy::Unknown) known_volume_ += leaf_volume(level);
}

void OccupancyTree::refresh_flags(std::int32_t node) {
    const std::int32_t c = nodes_[node].children;
    if (c < 0) return;
    std::uint8_t f = 0;
    for (int i = 0; i < 8; ++i) f |= nodes_[c + i].flags;
    nodes_[node].flags = f;
}

void OccupancyTree::refresh_path(const std::vector<std::int32_t>& path) {
    for (auto it = path.rbegin(); it != path.rend(); ++it) refresh_flags(*it);
}

void OccupancyTree::free_subtree(std::int32_t node, int level) {
    Node& n = nodes_[node];
    if (n.children < 0) {
        if (n.state == Occupancy::Unknown) {
            n.state = Occupancy::Free;
            n.flags = kFreeBit;
            known_volume_ += leaf_volume(level);
        }
        return;
    }
    if (!(n.flags & kUnknownBit)) return;
    if (!(n.flags & kOccBit)) {
        collapse_to(node, level, Occupancy::Free);
        return;
    }
    const std::int32_t c = n.children;
    for (int i = 0; i < 8; ++i) free_subtree(c + i, level - 1);
    refresh_flags(node);
}

void OccupancyTree::mark_free(const VoxelKey& k, int level) {
    if (!in_range(k, level)) return;
    auto& path = scratch_path_;
    path.clear();
    std::int32_t n = 0;
    bool carved = false;
    for (int l = depth_; l > level; --l) {
        path.push_back(n);
        if (nodes_[n].children < 0) {
            if (nodes_[n].state == Occupancy::Free) return;
            if (nodes_[n].state == Occupancy::Occupied) carved = true;
            split(n);
        }
        n = nodes_[n].children + child_slot(k, l - 1, level);
    }
    Node& t = nodes_[n];
    if (t.children < 0) {
        if (t.state == Occupancy::Free) return;
        if (t.state == Occupancy::Occupied && !carved && !t.inherited) return;
        if (t.state == Occupancy::Unknown) known_volume_ += leaf_volume(level);
        t.state = Occupancy::Free;
        t.flags = kFreeBit;
        t.inherited = false;
    } else {
        free_subtree(n, level);
    }
    refresh_path(path);
}

void OccupancyTree::mark_occupied(const VoxelKey& k, int level) {
    if (!in_range(k, level)) return;
    auto& path = scratch_path_;
    path.clear();
    std::int32_t n = 0;
    for (int l = depth_; l > level; --l) {
        path.push_back(n);
        // a coarser Occupied leaf is split too, so this voxel is recorded as observed
        if (nodes_[n].children < 0) split(n);
        n = nodes_[n].children + child_slot(k, l - 1, level);
    }
    if (nodes_[n].children < 0 && nodes_[n].state == Occupancy::Occupied) {
        nodes_[n].inherited = false;  // now observed at its own level
        return;
    }
    collapse_to(n, level, Occupancy::Occupied);
    refresh_path(path);
}

void OccupancyTree::set_node(const VoxelKey& k, int level, Occupancy state) {
    if (!in_range(k, level)) return;
    auto& path = scratch_path_;
    path.clear();
    std::int32_t n = 0;
    for (int l = depth_; l > level; --l) {
        path.push_back(n);
        if (nodes_[n].children < 0) {
            if (nodes_[n].state == state) return;
            split(n);
        }
        n = nodes_[n].children + child_slot(k, l - 1, level);
    }
    collapse_to(n, level, state);
    refresh_path(path);
}

Occupancy OccupancyTree::query_key(const VoxelKey& k, int level) const {
    if (!in_range(k, level)) return Occupancy::Unknown;
    std::int32_t n = 0;
    for (int l = depth_; l > level; --l) {
        const Node& node = nodes_[n];
        if (node.children < 0) return node.state;
        n = node.children + child_slot(k, l - 1, level);
    }
    const Node& node = nodes_[n];
    return node.children < 0 ? node.state : aggregate(node.flags);
}

Occupancy OccupancyTree::query_level(const Vec3& p, int level) const {
    VoxelKey k;
    if (!key_of(p, k)) return Occupancy::Unknown;
    return query_key(k.at_level(level), level);
}

Occupancy OccupancyTree::query(const Vec3& p, double at_precision) const {
    return query_level(p, level_for(at_precision));
}

OccupancyTree OccupancyTree::collapsed_copy(int level) const {
    OccupancyTree dst(origin_, vox_min_, depth_);
    dst.nodes_.reserve(nodes_.size());
    auto rec = [&](auto&& self, std::int32_t s, int l, std::int32_t d) -> void {
        const Node src = nodes_[s];
        if (src.children < 0 || l == level) {
            const Occupancy st = src.children < 0 ? src.state : aggregate(src.flags);
            dst.nodes_[d] = Node{-1, st, bit_of(st)};
            if (st != Occupancy::Unknown) dst.known_volume_ += dst.leaf_volume(l);
            return;
        }
        if (!(src.flags & (kFreeBit | kOccBit))) {
            dst.nodes_[d] = Node{};
            return;
        }
        const std::int32_t block = dst.alloc_children(Occupancy::Unknown, kUnknownBit);
        dst.nodes_[d].children = block;
        for (int i = 0; i < 8; ++i) self(self, src.children + i, l - 1, block + i);
        dst.refresh_flags(d);
    };
    rec(rec, 0, depth_, 0);
    return dst;
}

namespace {

VoxelKey child_key(const VoxelKey& k, int slot) {
    return {(k.x << 1) | (slot & 1u), (k.y << 1) | ((slot >> 1) & 1u), (k.z << 1) | ((slot >> 2) & 1u)};
}

}  // namespace

void OccupancyTree::visit_known_at_level(int level,
                                         const std::function<void(const NodeRef&)>& fn) const {
    auto rec = [&](auto&& self, std::int32_t n, int l, VoxelKey k) -> void {
        const Node& node = nodes_[n];
        if (!(node.flags & (kFreeBit | kOccBit))) return;
        if (node.children < 0) {
            fn(NodeRef{k, l, node.state});
            return;
        }
        if (l == level) {
            fn(NodeRef{k, l, aggregate(node.flags)});
            return;
        }
        for (int i = 0; i < 8; ++i) self(self, node.children + i, l - 1, child_key(k, i));
    };
    rec(rec, 0, depth_, VoxelKey{});
}

void OccupancyTree::visit_leaves(const std::function<void(const NodeRef&)>& fn) const {
    auto rec = [&](auto&& self, std::int32_t n, int l, VoxelKey k) -> void {
        const Node& node = nodes_[n];
        if (node.children < 0) {
            fn(NodeRef{k, l, node.state});
            return;
        }
        for (int i = 0; i < 8; ++i) self(self, node.children + i, l - 1, child_key(k, i));
    };
    rec(rec, 0, depth_, VoxelKey{});
}

std::size_t OccupancyTree::leaf_count() const {
    std::size_t n = 0;
    visit_leaves([&](const NodeRef&) { ++n; });
    return n;
}

std::size_t OccupancyTree::leaf_count(Occupancy state) const {
    std::size_t n = 0;
    visit_leaves([&](const NodeRef& r) { n += r.state == state; });
    return n;
}

bool OccupancyTree::has_occupied() const { return (nodes_[0].flags & kOccBit) != 0; }

Aabb OccupancyTree::known_bounds() const {
    Aabb box{{kInf, kInf, kInf}, {-kInf, -kInf, -kInf}};
    visit_known_at_level(0, [&](const NodeRef& r) {
        if (r.state == Occupancy::Unknown) return;
        const double h = size_at(r.level) / 2.0;
        const Vec3 c = center_of(r.key, r.level);
        box.min = {std::min(box.min.x, c.x - h), std::min(box.min.y, c.y - h), std::min(box.min.z, c.z - h)};
        box.max = {std::max(box.max.x, c.x + h), std::max(box.max.y, c.y + h), std::max(box.max.z, c.z + h)};
    });
    return box;
}

double OccupancyTree::nearest_occupied_distance(const Vec3& p) const {
    double best = kInf;
    constexpr double kInvSqrt3 = 0.57735026918962576;
    auto lower_bound = [&](const VoxelKey& k, int l) {
        const double s = size_at(l);
        const Vec3 lo = origin_ + Vec3{k.x * s, k.y * s, k.z * s};
        const double d = Aabb{lo, lo + Vec3{s, s, s}}.distance_to(p);
        return std::max({0.0, d * kInvSqrt3, d - s / 2.0});
    };
    auto rec = [&](auto&& self, std::int32_t n, int l, VoxelKey k) -> void {
        const Node& node = nodes_[n];
        if (!(node.flags & kOccBit)) return;
        if (node.children < 0) {
            const double d = std::max(0.0, distance(center_of(k, l), p) - size_at(l) / 2.0);
            best = std::min(best, d);
            return;
        }
        std::array<std::pair<double, int>, 8> order;
        for (int i = 0; i < 8; ++i) order[i] = {lower_bound(child_key(k, i), l - 1), i};
        std::sort(order.begin(), order.end());
        for (const auto& [lb, i] : order) {
            if (lb >= best) break;
            self(self, node.children + i, l - 1, child_key(k, i));
        }
    };
    rec(rec, 0, depth_, VoxelKey{});
    return best;
}

std::uint64_t OccupancyTree::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ULL;
    };
    auto rec = [&](auto&& self, std::int32_t n) -> void {
        const Node& node = nodes_[n];
        if (node.children < 0) {
            mix(static_cast<std::uint64_t>(node.state) + 1);
            return;
        }
        mix(0xff);
        for (int i = 0; i < 8; ++i) self(self, node.children + i);
    };
    rec(rec, 0);
    return h;
}

void OccupancyTree::write_leaves_csv(std::ostream& os) const {
    os << "x,y,z,size,state\n" << std::setprecision(10);
    visit_leaves([&](const NodeRef& r) {
        if (r.state == Occupancy::Unknown) return;
        const Vec3 c = center_of(r.key, r.level);
        os << c.x << ',' << c.y << ',' << c.z << ',' << size_at(r.level) << ','
           << occupancy_name(r.state) << '\n';
    });
}

}  // namespace roborun
