#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "navforge/worldmap.hpp"
#include "test_util.hpp"

using namespace navforge;

TEST_CASE("load_map parses the smallest closed map") {
    GridMap m = load_map("3 3 1.0\n###\n#.#\n###");
    CHECK(m.width() == 3);
    CHECK(m.height() == 3);
    CHECK(m.resolution() == 1.0);
    CHECK(m.free_cell_count() == 1);
    CHECK_FALSE(m.occupied(1, 1));
}

TEST_CASE("load_map keeps interior blocks occupied") {
    GridMap m = load_map("5 4 0.5\n#####\n#.#.#\n#.#.#\n#####");
    CHECK(m.occupied(2, 1));
    CHECK(m.occupied(2, 2));
    CHECK_FALSE(m.occupied(1, 1));
    CHECK_FALSE(m.occupied(3, 2));
}

TEST_CASE("12 m map at 0.1 m resolution serializes with a 120x120 header") {
    GridMap m = generate_map(7, {.size_m = 12.0, .resolution = 0.1,
                                 .obstacle_density = 0.0});
    CHECK(m.width() == 120);
    CHECK(m.height() == 120);
    CHECK(m.serialize().substr(0, 12) == "120 120 0.1\n");
}

TEST_CASE("load_map rejects malformed input with a line number") {
    CHECK_THROWS_WITH_AS(load_map("nonsense\n###\n"), doctest::Contains("line 1"),
                         IoError);
    CHECK_THROWS_WITH_AS(load_map("3 3\n###\n#.#\n###"), doctest::Contains("line 1"),
                         IoError);
    CHECK_THROWS_WITH_AS(load_map("0 3 1.0\n"), doctest::Contains("line 1"), IoError);
    CHECK_THROWS_WITH_AS(load_map("3 3 1.0\n###\n#.##\n###"),
                         doctest::Contains("line 3"), IoError);
    CHECK_THROWS_WITH_AS(load_map("3 3 1.0\n###\n#.#"), doctest::Contains("line 4"),
                         IoError);
    CHECK_THROWS_WITH_AS(load_map("3 3 1.0\n###\n#x#\n###"),
                         doctest::Contains("line 3"), IoError);
}

TEST_CASE("load_map forces the boundary ring occupied") {
    GridMap m = load_map("4 4 1.0\n....\n....\n....\n....");
    for (int i = 0; i < 4; ++i) {
        CHECK(m.occupied(i, 0));
        CHECK(m.occupied(i, 3));
        CHECK(m.occupied(0, i));
        CHECK(m.occupied(3, i));
    }
}

TEST_CASE("world_to_cell floor convention") {
    GridMap m = test_util::empty_room(6, 1.0);
    CHECK(m.world_to_cell({2.5, 0.5}) == CellIndex{2, 0});
    CHECK(m.world_to_cell({1.0, 0.0}) == CellIndex{1, 0});
    CHECK_FALSE(m.world_to_cell({-0.1, 0.0}).has_value());
    CHECK_FALSE(m.world_to_cell({0.0, 6.0}).has_value());
}

TEST_CASE("world_to_cell inverts cell_center on every in-bounds cell") {
    GridMap m = test_util::empty_room(9, 0.25);
    for (int cy = 0; cy < m.height(); ++cy)
        for (int cx = 0; cx < m.width(); ++cx) {
            auto c = m.world_to_cell(m.cell_center({cx, cy}));
            REQUIRE(c.has_value());
            CHECK(*c == CellIndex{cx, cy});
        }
}

TEST_CASE("serialize round trip is bit-exact") {
    GridMap m = generate_map(3, {.size_m = 8.0, .resolution = 0.1,
                                 .obstacle_density = 0.15});
    GridMap back = load_map(m.serialize());
    CHECK(back == m);
    CHECK(back.cells() == m.cells());
}

TEST_CASE("generate_map density 0 gives an empty closed room") {
    GridMap m = generate_map(11, {.size_m = 6.0, .resolution = 0.1,
                                  .obstacle_density = 0.0});
    CHECK(m.interior_occupied_fraction() == 0.0);
    CHECK(m.free_cell_count() == static_cast<size_t>(58) * 58);
}

TEST_CASE("generate_map is deterministic for a fixed seed") {
    MapGenSpec spec{.size_m = 10.0, .resolution = 0.1, .obstacle_density = 0.2};
    GridMap a = generate_map(42, spec);
    GridMap b = generate_map(42, spec);
    CHECK(a.cells() == b.cells());
    GridMap c = generate_map(43, spec);
    CHECK(a.cells() != c.cells());
}

TEST_CASE("generated free space is one connected component (flood-fill oracle)") {
    for (uint64_t seed : {42ull, 7ull, 99ull}) {
        for (RoomStyle style : {RoomStyle::Blocks, RoomStyle::Rooms}) {
            GridMap m = generate_map(seed, {.size_m = 10.0, .resolution = 0.1,
                                            .obstacle_density = 0.2,
                                            .room_style = style});
            // Independent BFS recount.
            std::set<std::pair<int, int>> reached;
            std::vector<std::pair<int, int>> frontier;
            for (int cy = 0; cy < m.height() && frontier.empty(); ++cy)
                for (int cx = 0; cx < m.width() && frontier.empty(); ++cx)
                    if (!m.occupied(cx, cy))
                        frontier.push_back({cx, cy});
            reached.insert(frontier.begin(), frontier.end());
            while (!frontier.empty()) {
                auto [cx, cy] = frontier.back();
                frontier.pop_back();
                const int nx[4] = {cx - 1, cx + 1, cx, cx};
                const int ny[4] = {cy, cy, cy - 1, cy + 1};
                for (int k = 0; k < 4; ++k)
                    if (!m.occupied(nx[k], ny[k]) &&
                        reached.insert({nx[k], ny[k]}).second)
                        frontier.push_back({nx[k], ny[k]});
            }
            CHECK(reached.size() == m.free_cell_count());
        }
    }
}

TEST_CASE("generated density lands within 10% of the request") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        for (double density : {0.05, 0.2, 0.4}) {
            GridMap m = generate_map(seed, {.size_m = 12.0, .resolution = 0.1,
                                            .obstacle_density = density});
            CHECK(std::abs(m.interior_occupied_fraction() - density) <=
                  0.10 * density);
        }
    }
}

TEST_CASE("sample_free_pose returns the center of the only free cell") {
    GridMap m = load_map("3 3 1.0\n###\n#.#\n###");
    Rng rng(5);
    Pose p = sample_free_pose(m, rng, 0.0);
    CHECK(p.position.x == doctest::Approx(1.5));
    CHECK(p.position.y == doctest::Approx(1.5));
    CHECK(p.heading > -std::numbers::pi);
    CHECK(p.heading <= std::numbers::pi);
}

TEST_CASE("sample_free_pose errors when clearance cannot be met") {
    GridMap m = load_map("3 3 1.0\n###\n#.#\n###");
    Rng rng(5);
    CHECK_THROWS_AS(sample_free_pose(m, rng, 10.0), ConfigError);
}

TEST_CASE("1000 sampled poses pass a brute-force clearance recheck") {
    GridMap m = generate_map(21, {.size_m = 10.0, .resolution = 0.1,
                                  .obstacle_density = 0.2});
    Rng rng(77);
    const double clearance = 0.25;
    for (int i = 0; i < 1000; ++i) {
        Pose p = sample_free_pose(m, rng, clearance);
        // Exhaustive disc-overlap check over every occupied cell.
        bool clear = true;
        for (int cy = 0; cy < m.height(); ++cy)
            for (int cx = 0; cx < m.width(); ++cx) {
                if (!m.occupied(cx, cy))
                    continue;
                double px = std::clamp(p.position.x, cx * 0.1, (cx + 1) * 0.1);
                double py = std::clamp(p.position.y, cy * 0.1, (cy + 1) * 0.1);
                if (std::hypot(px - p.position.x, py - p.position.y) <= clearance)
                    clear = false;
            }
        CHECK(clear);
    }
}

TEST_CASE("sampled headings cover (-pi, pi] uniformly") {
    GridMap m = test_util::empty_room(20, 0.5);
    Rng rng(9);
    int buckets[8] = {0};
    const int n = 8000;
    for (int i = 0; i < n; ++i) {
        Pose p = sample_free_pose(m, rng, 0.3);
        int b = static_cast<int>((p.heading + std::numbers::pi) /
                                 (2 * std::numbers::pi) * 8);
        buckets[std::clamp(b, 0, 7)] += 1;
    }
    for (int b = 0; b < 8; ++b)
        CHECK(std::abs(buckets[b] - n / 8) < 5 * std::sqrt(n / 8.0));
}

TEST_CASE("roster round trip and validation") {
    ScenarioRoster roster;
    roster.map_id = "m";
    roster.pairs.push_back({{{1.5, 1.5}, 0.25}, {8.5, 8.5}});
    roster.pairs.push_back({{{2.5, 7.5}, -1.0}, {7.5, 2.5}});
    std::string path = "roster_test.tmp";
    save_roster_file(roster, path);
    ScenarioRoster back = load_roster_file(path);
    REQUIRE(back.pairs.size() == 2);
    CHECK(back.pairs[0].start.position.x == 1.5);
    CHECK(back.pairs[0].start.heading == 0.25);
    CHECK(back.pairs[1].goal.y == 2.5);

    GridMap open = test_util::empty_room(10, 1.0);
    CHECK_NOTHROW(validate_roster(back, open, 0.2));
    ScenarioRoster bad = back;
    bad.pairs.push_back({{{0.1, 0.1}, 0.0}, {5.0, 5.0}});  // start inside the wall
    CHECK_THROWS_AS(validate_roster(bad, open, 0.2), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("content hash distinguishes maps and matches itself") {
    GridMap a = generate_map(1, {.size_m = 6.0, .obstacle_density = 0.1});
    GridMap b = generate_map(2, {.size_m = 6.0, .obstacle_density = 0.1});
    CHECK(a.content_hash() == a.content_hash());
    CHECK(a.content_hash() != b.content_hash());
}
