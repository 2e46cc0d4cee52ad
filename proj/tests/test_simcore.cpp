#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "navforge/simcore.hpp"
#include "test_util.hpp"

using namespace navforge;
using test_util::empty_room;
using test_util::raymarch_oracle;

TEST_CASE("raycast hits an axis-aligned wall at the exact boundary") {
    // Wall column at cell x = 5 covers world x in [5, 6).
    std::vector<std::string> rows;
    rows.push_back("##########");
    for (int i = 0; i < 8; ++i)
        rows.push_back("#....#...#");
    rows.push_back("##########");
    GridMap m = test_util::map_from_rows(rows, 1.0);
    CHECK(raycast(m, {1.5, 1.5}, 0.0, 20.0) == doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("raycast clips to max_range in an open corridor") {
    GridMap m = empty_room(40, 1.0);
    CHECK(raycast(m, {2.0, 20.0}, 0.0, 10.0) == 10.0);
}

TEST_CASE("raycast rejects an occupied origin") {
    GridMap m = empty_room(5, 1.0);
    CHECK_THROWS_AS(raycast(m, {0.5, 0.5}, 0.0, 10.0), std::invalid_argument);
}

TEST_CASE("raycast matches the fine-step marching oracle on random maps") {
    Rng rng(2024);
    for (uint64_t seed : {5ull, 6ull}) {
        GridMap m = generate_map(seed, {.size_m = 8.0, .resolution = 0.1,
                                        .obstacle_density = 0.25});
        int checked = 0;
        while (checked < 500) {
            Point2 origin{rng.uniform(0.3, 7.7), rng.uniform(0.3, 7.7)};
            auto c = m.world_to_cell(origin);
            if (!c || m.occupied(c->x, c->y))
                continue;
            double angle = rng.uniform(-std::numbers::pi, std::numbers::pi);
            double got = raycast(m, origin, angle, 10.0);
            double want = raymarch_oracle(m, origin, angle, 10.0);
            CHECK(std::abs(got - want) <= 2e-4);
            ++checked;
        }
    }
}

TEST_CASE("scan in a wide-open room returns max_range everywhere") {
    GridMap m = empty_room(300, 1.0);  // walls far beyond range
    RobotState s;
    s.pose = {{150.0, 150.0}, 0.7};
    LidarScan sc = scan(m, s, 10.0);
    for (double r : sc.ranges)
        CHECK(r == 10.0);
}

TEST_CASE("beam 342 points within one beam spacing of the heading") {
    const double spacing = deg2rad(270.0 / 683.0);
    CHECK(std::abs(beam_angle_offset(342)) <= spacing);
    CHECK(beam_angle_offset(0) == doctest::Approx(deg2rad(-135.0)));
    CHECK(beam_angle_offset(683) == doctest::Approx(deg2rad(135.0)));
}

TEST_CASE("rotating by one beam spacing shifts the scan by one index") {
    GridMap m = generate_map(17, {.size_m = 10.0, .resolution = 0.1,
                                  .obstacle_density = 0.15});
    Rng rng(31);
    Pose p = sample_free_pose(m, rng, 0.3);
    const double spacing = deg2rad(270.0 / 683.0);
    RobotState a, b;
    a.pose = {p.position, 0.4};
    b.pose = {p.position, 0.4 + spacing};
    LidarScan sa = scan(m, a, 10.0);
    LidarScan sb = scan(m, b, 10.0);
    for (int i = 0; i + 1 < kLidarBeams; ++i)
        CHECK(sb.ranges[i] == doctest::Approx(sa.ranges[i + 1]).epsilon(1e-6));
}

TEST_CASE("step integrates straight motion") {
    GridMap m = empty_room(40, 1.0);
    EpisodeState ep;
    ep.robot.pose = {{10.0, 10.0}, 0.0};
    ep.goal = {30.0, 30.0};
    ep.timeout = 100;
    SimConfig cfg;
    auto r = step(ep, {0.5, 0.0}, cfg, m);
    CHECK(r.state.robot.pose.position.x == doctest::Approx(10.05).epsilon(1e-12));
    CHECK(r.state.robot.pose.position.y == doctest::Approx(10.0));
    CHECK(r.state.robot.pose.heading == 0.0);
    CHECK_FALSE(r.action_clamped);
}

TEST_CASE("step rotates in place") {
    GridMap m = empty_room(40, 1.0);
    EpisodeState ep;
    ep.robot.pose = {{10.0, 10.0}, 0.0};
    ep.goal = {30.0, 30.0};
    ep.timeout = 100;
    auto r = step(ep, {0.0, 1.0}, SimConfig{}, m);
    CHECK(r.state.robot.pose.heading == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.state.robot.pose.position.x == doctest::Approx(10.0));
    CHECK(r.state.robot.pose.position.y == doctest::Approx(10.0));
}

TEST_CASE("step follows the exact arc") {
    GridMap m = empty_room(40, 1.0);
    EpisodeState ep;
    ep.robot.pose = {{10.0, 10.0}, 0.0};
    ep.goal = {30.0, 30.0};
    ep.timeout = 100;
    auto r = step(ep, {0.5, 1.0}, SimConfig{}, m);
    CHECK(r.state.robot.pose.position.x ==
          doctest::Approx(10.0 + 0.5 * std::sin(0.1)).epsilon(1e-12));
    CHECK(r.state.robot.pose.position.y ==
          doctest::Approx(10.0 + 0.5 * (1.0 - std::cos(0.1))).epsilon(1e-12));
    CHECK(r.state.robot.pose.heading == doctest::Approx(0.1));
}

TEST_CASE("exact arc matches fine-step Euler within 1e-6 across the envelope") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Pose p{{rng.uniform(-1, 1), rng.uniform(-1, 1)},
               rng.uniform(-std::numbers::pi, std::numbers::pi)};
        double v = rng.uniform(0.0, 0.5);
        double omega = rng.uniform(-1.0, 1.0);
        Pose exact = integrate_unicycle(p, v, omega, 0.1);

        // 1e-6-step explicit Euler reference.
        double x = p.position.x, y = p.position.y, h = p.heading;
        const int n = 100000;
        const double dt = 0.1 / n;
        for (int i = 0; i < n; ++i) {
            x += v * dt * std::cos(h);
            y += v * dt * std::sin(h);
            h += omega * dt;
        }
        CHECK(std::abs(exact.position.x - x) < 1e-6);
        CHECK(std::abs(exact.position.y - y) < 1e-6);
        CHECK(std::abs(wrap_angle(exact.heading - h)) < 1e-9);
    }
}

TEST_CASE("collision freezes the pose at the last free pose") {
    std::vector<std::string> rows;
    rows.push_back("########");
    for (int i = 0; i < 6; ++i)
        rows.push_back("#..##..#");
    rows.push_back("########");
    GridMap m = test_util::map_from_rows(rows, 0.25);
    EpisodeState ep;
    ep.robot.pose = {{0.70, 1.0}, 0.0};  // facing the interior block at x=0.75
    ep.goal = {1.9, 1.9};
    ep.timeout = 100;
    SimConfig cfg;
    cfg.robot_radius = 0.1;
    auto r = step(ep, {0.5, 0.0}, cfg, m);
    CHECK(r.state.status == EpisodeStatus::Collided);
    CHECK(r.state.robot.pose.position.x == 0.70);
    CHECK(r.state.step_count == 1);
}

TEST_CASE("arrival triggers exactly at d <= d_min and precedes timeout") {
    GridMap m = empty_room(40, 1.0);
    SimConfig cfg;
    EpisodeState ep;
    ep.robot.pose = {{10.0, 10.0}, 0.0};
    ep.goal = {10.55, 10.0};  // one step of 0.05 m brings d to exactly 0.5
    ep.timeout = 1;           // the same step is also the timeout step
    auto r = step(ep, {0.5, 0.0}, cfg, m);
    CHECK(distance_to_goal(r.state) == doctest::Approx(0.5));
    CHECK(r.state.status == EpisodeStatus::Arrived);

    ep.goal = {15.0, 10.0};
    auto t = step(ep, {0.5, 0.0}, cfg, m);
    CHECK(t.state.status == EpisodeStatus::TimedOut);
}

TEST_CASE("terminal episodes reject further steps") {
    GridMap m = empty_room(40, 1.0);
    EpisodeState ep;
    ep.robot.pose = {{10.0, 10.0}, 0.0};
    ep.goal = {10.2, 10.0};
    ep.timeout = 10;
    auto r = step(ep, {0.1, 0.0}, SimConfig{}, m);
    CHECK(r.state.status == EpisodeStatus::Arrived);
    CHECK_THROWS_AS(step(r.state, {0.1, 0.0}, SimConfig{}, m), std::logic_error);
}

TEST_CASE("out-of-range actions clamp and report") {
    GridMap m = empty_room(40, 1.0);
    EpisodeState ep;
    ep.robot.pose = {{10.0, 10.0}, 0.0};
    ep.goal = {30.0, 30.0};
    ep.timeout = 100;
    auto r = step(ep, {0.9, -3.0}, SimConfig{}, m);
    CHECK(r.action_clamped);
    CHECK(r.state.robot.v == 0.5);
    CHECK(r.state.robot.omega == -1.0);
}

TEST_CASE("distance_to_goal basics") {
    EpisodeState ep;
    ep.robot.pose = {{0.0, 0.0}, 0.0};
    ep.goal = {3.0, 4.0};
    CHECK(distance_to_goal(ep) == 5.0);
    ep.goal = {0.0, 0.0};
    CHECK(distance_to_goal(ep) == 0.0);
}

TEST_CASE("accepted steps never penetrate occupied cells") {
    GridMap m = generate_map(13, {.size_m = 8.0, .resolution = 0.1,
                                  .obstacle_density = 0.2});
    SimConfig cfg;
    Rng rng(8);
    for (int episode = 0; episode < 20; ++episode) {
        Pose start = sample_free_pose(m, rng, cfg.robot_radius + 0.01);
        EpisodeState ep;
        ep.robot.pose = start;
        ep.goal = {4.0, 4.0};
        ep.timeout = 200;
        while (ep.status == EpisodeStatus::Running) {
            Action a{rng.uniform(0.0, 0.5), rng.uniform(-1.0, 1.0)};
            auto r = step(ep, a, cfg, m);
            if (r.state.status != EpisodeStatus::Collided) {
                // Brute-force disc/grid overlap at the accepted pose.
                bool overlap = false;
                for (int cy = 0; cy < m.height(); ++cy)
                    for (int cx = 0; cx < m.width(); ++cx) {
                        if (!m.occupied(cx, cy))
                            continue;
                        double px = std::clamp(r.state.robot.pose.position.x,
                                               cx * 0.1, (cx + 1) * 0.1);
                        double py = std::clamp(r.state.robot.pose.position.y,
                                               cy * 0.1, (cy + 1) * 0.1);
                        if (std::hypot(px - r.state.robot.pose.position.x,
                                       py - r.state.robot.pose.position.y) <=
                            cfg.robot_radius)
                            overlap = true;
                    }
                CHECK_FALSE(overlap);
            }
            ep = r.state;
        }
    }
}
