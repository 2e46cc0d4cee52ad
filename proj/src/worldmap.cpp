#include "navforge/worldmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

namespace navforge {

GridMap::GridMap(int width_cells, int height_cells, double resolution,
                 std::vector<uint8_t> cells)
    : width_(width_cells), height_(height_cells), resolution_(resolution),
      cells_(std::move(cells)) {
    if (width_ <= 0 || height_ <= 0)
        throw std::invalid_argument("GridMap: dimensions must be positive");
    if (!(resolution_ > 0.0) || !std::isfinite(resolution_))
        throw std::invalid_argument("GridMap: resolution must be positive");
    if (cells_.size() != static_cast<size_t>(width_) * height_)
        throw std::invalid_argument("GridMap: cell array size mismatch");
    // Closed workspace: force the boundary ring.
    for (int cx = 0; cx < width_; ++cx) {
        cells_[cx] = 1;
        cells_[static_cast<size_t>(height_ - 1) * width_ + cx] = 1;
    }
    for (int cy = 0; cy < height_; ++cy) {
        cells_[static_cast<size_t>(cy) * width_] = 1;
        cells_[static_cast<size_t>(cy) * width_ + width_ - 1] = 1;
    }
}

std::optional<CellIndex> GridMap::world_to_cell(const Point2& p) const {
    int cx = static_cast<int>(std::floor(p.x / resolution_));
    int cy = static_cast<int>(std::floor(p.y / resolution_));
    if (!in_bounds(cx, cy))
        return std::nullopt;
    return CellIndex{cx, cy};
}

Point2 GridMap::cell_center(const CellIndex& c) const {
    return {(c.x + 0.5) * resolution_, (c.y + 0.5) * resolution_};
}

size_t GridMap::free_cell_count() const {
    return static_cast<size_t>(std::count(cells_.begin(), cells_.end(), uint8_t{0}));
}

double GridMap::interior_occupied_fraction() const {
    if (width_ <= 2 || height_ <= 2)
        return 1.0;
    size_t occ = 0;
    for (int cy = 1; cy < height_ - 1; ++cy)
        for (int cx = 1; cx < width_ - 1; ++cx)
            occ += cells_[static_cast<size_t>(cy) * width_ + cx] != 0;
    return static_cast<double>(occ) /
           (static_cast<double>(width_ - 2) * (height_ - 2));
}

std::string GridMap::serialize() const {
    std::string out = std::to_string(width_) + " " + std::to_string(height_) +
                      " " + format_double(resolution_) + "\n";
    out.reserve(out.size() + static_cast<size_t>(height_) * (width_ + 1));
    for (int cy = 0; cy < height_; ++cy) {
        for (int cx = 0; cx < width_; ++cx)
            out.push_back(occupied(cx, cy) ? '#' : '.');
        out.push_back('\n');
    }
    return out;
}

uint64_t GridMap::content_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : serialize()) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

GridMap load_map(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header))
        throw IoError("map parse error at line 1: missing header");
    std::istringstream hs(header);
    long long w = 0, h = 0;
    double res = 0.0;
    if (!(hs >> w >> h >> res))
        throw IoError("map parse error at line 1: header must be "
                      "'width_cells height_cells resolution'");
    std::string trailing;
    if (hs >> trailing)
        throw IoError("map parse error at line 1: trailing content '" + trailing + "'");
    if (w <= 0 || h <= 0)
        throw IoError("map parse error at line 1: zero or negative dimensions");
    if (!(res > 0.0))
        throw IoError("map parse error at line 1: resolution must be > 0");

    std::vector<uint8_t> cells;
    cells.reserve(static_cast<size_t>(w) * h);
    for (long long row = 0; row < h; ++row) {
        std::string line;
        if (!std::getline(in, line))
            throw IoError("map parse error at line " + std::to_string(row + 2) +
                          ": expected " + std::to_string(h) + " rows, got " +
                          std::to_string(row));
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (static_cast<long long>(line.size()) != w)
            throw IoError("map parse error at line " + std::to_string(row + 2) +
                          ": row length " + std::to_string(line.size()) +
                          ", expected " + std::to_string(w));
        for (char c : line) {
            if (c == '#')
                cells.push_back(1);
            else if (c == '.')
                cells.push_back(0);
            else
                throw IoError("map parse error at line " + std::to_string(row + 2) +
                              ": unexpected character '" + std::string(1, c) + "'");
        }
    }
    return GridMap(static_cast<int>(w), static_cast<int>(h), res, std::move(cells));
}

GridMap load_map_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open map file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_map(ss.str());
}

void save_map_file(const GridMap& map, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write map file: " + path);
    out << map.serialize();
    if (!out)
        throw IoError("write failed: " + path);
}

bool disc_overlaps_occupied(const GridMap& map, const Point2& center, double radius) {
    double res = map.resolution();
    int x0 = static_cast<int>(std::floor((center.x - radius) / res));
    int x1 = static_cast<int>(std::floor((center.x + radius) / res));
    int y0 = static_cast<int>(std::floor((center.y - radius) / res));
    int y1 = static_cast<int>(std::floor((center.y + radius) / res));
    const double r2 = radius * radius;
    for (int cy = y0; cy <= y1; ++cy) {
        for (int cx = x0; cx <= x1; ++cx) {
            if (!map.occupied(cx, cy))
                continue;
            // Closest point of the cell rectangle to the disc center.
            double px = std::clamp(center.x, cx * res, (cx + 1) * res);
            double py = std::clamp(center.y, cy * res, (cy + 1) * res);
            double dx = px - center.x;
            double dy = py - center.y;
            if (dx * dx + dy * dy <= r2)
                return true;
        }
    }
    return false;
}

namespace {

size_t flood_fill_free_count(const std::vector<uint8_t>& cells, int w, int h) {
    size_t start = cells.size();
    for (size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == 0) {
            start = i;
            break;
        }
    }
    if (start == cells.size())
        return 0;
    std::vector<uint8_t> seen(cells.size(), 0);
    std::vector<size_t> stack{start};
    seen[start] = 1;
    size_t count = 0;
    while (!stack.empty()) {
        size_t i = stack.back();
        stack.pop_back();
        ++count;
        int cx = static_cast<int>(i % w);
        int cy = static_cast<int>(i / w);
        const int nx[4] = {cx - 1, cx + 1, cx, cx};
        const int ny[4] = {cy, cy, cy - 1, cy + 1};
        for (int k = 0; k < 4; ++k) {
            if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h)
                continue;
            size_t j = static_cast<size_t>(ny[k]) * w + nx[k];
            if (cells[j] == 0 && !seen[j]) {
                seen[j] = 1;
                stack.push_back(j);
            }
        }
    }
    return count;
}

void fill_rect(std::vector<uint8_t>& cells, int w, int x0, int y0, int rw, int rh) {
    for (int cy = y0; cy < y0 + rh; ++cy)
        for (int cx = x0; cx < x0 + rw; ++cx)
            cells[static_cast<size_t>(cy) * w + cx] = 1;
}

size_t count_occupied_interior(const std::vector<uint8_t>& cells, int w, int h) {
    size_t occ = 0;
    for (int cy = 1; cy < h - 1; ++cy)
        for (int cx = 1; cx < w - 1; ++cx)
            occ += cells[static_cast<size_t>(cy) * w + cx] != 0;
    return occ;
}

// Wall segment with a door gap, horizontal or vertical. Door gaps are
// kept >= 0.6 m at 0.1 m resolution so a 0.2 m-radius robot fits through.
void place_wall(std::vector<uint8_t>& cells, int w, int h, Rng& rng) {
    if (w < 12 || h < 12)
        return;
    bool horizontal = rng.uniform_int(2) == 0;
    int door = 6 + static_cast<int>(rng.uniform_int(3));
    if (horizontal) {
        int cy = 2 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(h - 4)));
        int len = w / 4 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(w / 2)));
        int x0 = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(
                         std::max(1, w - 1 - len))));
        int door_at = x0 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(
                               std::max(1, len - door))));
        for (int cx = x0; cx < std::min(w - 1, x0 + len); ++cx) {
            if (cx >= door_at && cx < door_at + door)
                continue;
            cells[static_cast<size_t>(cy) * w + cx] = 1;
        }
    } else {
        int cx = 2 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(w - 4)));
        int len = h / 4 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(h / 2)));
        int y0 = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(
                         std::max(1, h - 1 - len))));
        int door_at = y0 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(
                               std::max(1, len - door))));
        for (int cy = y0; cy < std::min(h - 1, y0 + len); ++cy) {
            if (cy >= door_at && cy < door_at + door)
                continue;
            cells[static_cast<size_t>(cy) * w + cx] = 1;
        }
    }
}

}  // namespace

GridMap generate_map(uint64_t seed, const MapGenSpec& spec) {
    if (spec.obstacle_density < 0.0 || spec.obstacle_density > 0.4)
        throw ConfigError("generate_map: obstacle_density must be in [0, 0.4]");
    if (spec.size_m < 4.0 * spec.resolution)
        throw ConfigError("generate_map: size_m too small for resolution");

    const int n = static_cast<int>(std::lround(spec.size_m / spec.resolution));
    const int w = n, h = n;
    const double interior = static_cast<double>(w - 2) * (h - 2);
    const size_t target = static_cast<size_t>(spec.obstacle_density * interior);

    // Cap obstacle footprints so placement granularity stays well inside
    // the +-10% density band.
    const size_t max_area = std::max<size_t>(
        1, std::min<size_t>(100, static_cast<size_t>(0.08 * spec.obstacle_density * interior)));
    const int max_side =
        std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(max_area)))));

    constexpr int kMaxAttempts = 64;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng(derive_seed(seed, 0x6d61702eULL + attempt));
        std::vector<uint8_t> cells(static_cast<size_t>(w) * h, 0);
        for (int cx = 0; cx < w; ++cx) {
            cells[cx] = 1;
            cells[static_cast<size_t>(h - 1) * w + cx] = 1;
        }
        for (int cy = 0; cy < h; ++cy) {
            cells[static_cast<size_t>(cy) * w] = 1;
            cells[static_cast<size_t>(cy) * w + w - 1] = 1;
        }

        if (target > 0) {
            size_t occ = 0;
            if (spec.room_style == RoomStyle::Rooms &&
                target > static_cast<size_t>(w + h)) {
                size_t wall_budget = target / 2;
                int guard = 0;
                while (occ < wall_budget && guard++ < 64) {
                    place_wall(cells, w, h, rng);
                    occ = count_occupied_interior(cells, w, h);
                }
            }
            int guard = 0;
            while (occ < target && guard++ < 100000) {
                int rw = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(max_side)));
                int rh = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(max_side)));
                if (rw > w - 2 || rh > h - 2)
                    continue;
                int x0 = 1 + static_cast<int>(
                                 rng.uniform_int(static_cast<uint64_t>(w - 1 - rw)));
                int y0 = 1 + static_cast<int>(
                                 rng.uniform_int(static_cast<uint64_t>(h - 1 - rh)));
                fill_rect(cells, w, x0, y0, rw, rh);
                occ = count_occupied_interior(cells, w, h);
            }
            double frac = static_cast<double>(occ) / interior;
            if (std::abs(frac - spec.obstacle_density) > 0.10 * spec.obstacle_density)
                continue;
        }

        size_t free_total = static_cast<size_t>(
            std::count(cells.begin(), cells.end(), uint8_t{0}));
        if (free_total == 0)
            continue;
        if (flood_fill_free_count(cells, w, h) != free_total)
            continue;

        return GridMap(w, h, spec.resolution, std::move(cells));
    }
    throw ConfigError("generate_map: no connected layout within density band after " +
                      std::to_string(kMaxAttempts) + " attempts");
}

Pose sample_free_pose(const GridMap& map, Rng& rng, double clearance) {
    std::vector<CellIndex> candidates;
    for (int cy = 1; cy < map.height() - 1; ++cy) {
        for (int cx = 1; cx < map.width() - 1; ++cx) {
            if (map.occupied(cx, cy))
                continue;
            CellIndex c{cx, cy};
            if (!disc_overlaps_occupied(map, map.cell_center(c), clearance))
                candidates.push_back(c);
        }
    }
    if (candidates.empty())
        throw ConfigError("sample_free_pose: no free cell with clearance " +
                          std::to_string(clearance));
    const CellIndex& c = candidates[rng.uniform_int(candidates.size())];
    double heading = std::numbers::pi - 2.0 * std::numbers::pi * rng.uniform();
    return Pose{map.cell_center(c), heading};
}

ScenarioRoster load_roster_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open roster file: " + path);
    ScenarioRoster roster;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        ScenarioPair p;
        if (!(ls >> p.start.position.x >> p.start.position.y >> p.start.heading >>
              p.goal.x >> p.goal.y)) {
            std::string any;
            std::istringstream probe(line);
            if (probe >> any)
                throw IoError("roster parse error at line " + std::to_string(lineno) +
                              ": expected 'start_x start_y heading goal_x goal_y'");
            continue;  // blank / comment-only line
        }
        roster.pairs.push_back(p);
    }
    return roster;
}

void save_roster_file(const ScenarioRoster& roster, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write roster file: " + path);
    out << "# start_x start_y heading goal_x goal_y\n";
    for (const auto& p : roster.pairs) {
        out << format_double(p.start.position.x) << " "
            << format_double(p.start.position.y) << " "
            << format_double(p.start.heading) << " " << format_double(p.goal.x)
            << " " << format_double(p.goal.y) << "\n";
    }
    if (!out)
        throw IoError("write failed: " + path);
}

ScenarioRoster sample_roster(const GridMap& map, uint64_t seed, double clearance,
                             int pairs, double min_separation) {
    Rng rng(derive_seed(seed, 0x726f7374657234ULL));
    ScenarioRoster roster;
    for (int i = 0; i < pairs; ++i) {
        ScenarioPair p;
        p.start = sample_free_pose(map, rng, clearance);
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            Pose g = sample_free_pose(map, rng, clearance);
            if (dist(g.position, p.start.position) >= min_separation) {
                p.goal = g.position;
                placed = true;
            }
        }
        if (!placed)
            throw ConfigError("sample_roster: no goal " +
                              format_double(min_separation) +
                              " m away from a sampled start");
        roster.pairs.push_back(p);
    }
    return roster;
}

void validate_roster(const ScenarioRoster& roster, const GridMap& map,
                     double clearance) {
    for (size_t i = 0; i < roster.pairs.size(); ++i) {
        const auto& p = roster.pairs[i];
        if (disc_overlaps_occupied(map, p.start.position, clearance))
            throw ConfigError("roster pair " + std::to_string(i) +
                              ": start position infeasible");
        if (disc_overlaps_occupied(map, p.goal, clearance))
            throw ConfigError("roster pair " + std::to_string(i) +
                              ": goal position infeasible");
    }
}

}  // namespace navforge
