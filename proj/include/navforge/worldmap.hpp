#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "navforge/common.hpp"
#include "navforge/rng.hpp"

namespace navforge {

struct CellIndex {
    int x = 0;
    int y = 0;
    bool operator==(const CellIndex&) const = default;
};

// Rasterized workspace. Cell (cx, cy) covers the world rectangle
// [cx*res, (cx+1)*res) x [cy*res, (cy+1)*res); storage is row-major by y.
// The boundary ring is always occupied, so the workspace is closed.
// Immutable after construction and safe to share across readers.
class GridMap {
public:
    GridMap(int width_cells, int height_cells, double resolution,
            std::vector<uint8_t> cells);

    int width() const { return width_; }
    int height() const { return height_; }
    double resolution() const { return resolution_; }
    double width_m() const { return width_ * resolution_; }
    double height_m() const { return height_ * resolution_; }

    bool in_bounds(int cx, int cy) const {
        return cx >= 0 && cx < width_ && cy >= 0 && cy < height_;
    }
    // Out-of-bounds cells read as occupied (closed world).
    bool occupied(int cx, int cy) const {
        if (!in_bounds(cx, cy))
            return true;
        return cells_[static_cast<size_t>(cy) * width_ + cx] != 0;
    }

    std::optional<CellIndex> world_to_cell(const Point2& p) const;
    Point2 cell_center(const CellIndex& c) const;

    const std::vector<uint8_t>& cells() const { return cells_; }
    size_t free_cell_count() const;
    // Occupied fraction over interior cells (boundary ring excluded).
    double interior_occupied_fraction() const;

    std::string serialize() const;
    uint64_t content_hash() const;  // FNV-1a over the serialized form

    bool operator==(const GridMap&) const = default;

private:
    int width_;
    int height_;
    double resolution_;
    std::vector<uint8_t> cells_;
};

// Parse the text map format:
//   line 1: "width_cells height_cells resolution"
//   then height_cells rows of '#' (occupied) / '.' (free), row 0 = y 0.
// The boundary ring is forced occupied. Malformed input throws IoError
// naming the offending line.
GridMap load_map(const std::string& text);
GridMap load_map_file(const std::string& path);
void save_map_file(const GridMap& map, const std::string& path);

// True if a disc at `center` with radius `radius` overlaps any occupied
// cell (or leaves the grid).
bool disc_overlaps_occupied(const GridMap& map, const Point2& center, double radius);

enum class RoomStyle { Blocks, Rooms };

struct MapGenSpec {
    double size_m = 12.0;
    double resolution = 0.1;
    double obstacle_density = 0.1;  // interior occupied fraction, in [0, 0.4]
    RoomStyle room_style = RoomStyle::Blocks;
};

// Deterministic for a fixed seed. The result always has an occupied
// boundary, a single connected free component, and an interior occupied
// fraction within 10% (relative) of the requested density. Throws
// ConfigError if no layout satisfies that after bounded retries.
GridMap generate_map(uint64_t seed, const MapGenSpec& spec);

struct Pose {
    Point2 position;
    double heading = 0.0;
};

// Uniform draw over cell centers whose surrounding disc of `clearance`
// is free of occupied cells; heading uniform in (-pi, pi]. Throws
// ConfigError when no cell qualifies.
Pose sample_free_pose(const GridMap& map, Rng& rng, double clearance);

struct ScenarioPair {
    Pose start;
    Point2 goal;
};

struct ScenarioRoster {
    std::string map_id;
    std::vector<ScenarioPair> pairs;
};

// Roster file: one pair per line, "start_x start_y heading goal_x goal_y",
// '#' starts a comment.
ScenarioRoster load_roster_file(const std::string& path);
void save_roster_file(const ScenarioRoster& roster, const std::string& path);

// Checks every start and goal against the map at the given clearance.
// Throws ConfigError naming the first infeasible pair.
void validate_roster(const ScenarioRoster& roster, const GridMap& map, double clearance);

// Draws `pairs` feasible start/goal pairs at the given clearance with
// starts and goals at least min_separation apart. Deterministic in seed.
ScenarioRoster sample_roster(const GridMap& map, uint64_t seed, double clearance,
                             int pairs, double min_separation);

}  // namespace navforge
