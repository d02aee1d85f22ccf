#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "harsim/daqsim.hpp"
#include "oracles.hpp"

using namespace harsim;

namespace {

SensorSpec sensor(std::string name, double rate, int channels = 1) {
    SensorSpec s;
    s.name = std::move(name);
    s.native_rate = rate;
    s.channels = channels;
    return s;
}

std::unique_ptr<Source> ramp(const SensorSpec& s, std::optional<std::uint64_t> limit = std::nullopt) {
    return std::make_unique<FunctionSource>(
        s, [c = s.channels](std::uint64_t, std::int64_t t) { return std::vector<double>(c, double(t) * 1e-9); },
        limit);
}

Session reference_session(double jitter_ppm = 0.0) {
    std::vector<std::unique_ptr<Source>> src;
    std::uint64_t seed = 1;
    for (const auto& s : reference_sensors()) {
        auto inner = ramp(s);
        src.push_back(jitter_ppm > 0 ? jitter_model(std::move(inner), jitter_ppm, seed++) : std::move(inner));
    }
    return start_sync(std::move(src));
}

std::vector<SensorSample> stream_of(double rate, std::size_t n, std::function<double(double)> fn) {
    std::vector<SensorSample> out;
    for (std::size_t j = 0; j < n; ++j) {
        const auto t = sample_time_ns(j, rate);
        out.push_back({t, {fn(double(t) * 1e-9)}});
    }
    return out;
}

}  // namespace

TEST_CASE("sensor catalogs") {
    const auto t1 = reference_sensors();
    REQUIRE(t1.size() == 6);
    CHECK(find_sensor(t1, "thermal").channels == 768);
    CHECK(find_sensor(t1, "thermal").conv_dim == ConvDim::k2D);
    CHECK(find_sensor(t1, "imu").native_rate == 119.0);
    CHECK(modality_catalog().size() == 7);
    CHECK_THROWS_AS(find_sensor(t1, "sonar"), std::out_of_range);
    CHECK_THROWS(sensor("bad", 0.0).validate());
    CHECK_THROWS(sensor("bad", 10.0, 0).validate());
}

TEST_CASE("start_sync shares the time origin") {
    std::vector<std::unique_ptr<Source>> src;
    src.push_back(ramp(sensor("fast", 100)));
    src.push_back(ramp(sensor("slow", 50)));
    Session s = start_sync(std::move(src));
    CHECK_THROWS_AS(s.start(), std::logic_error);
    std::map<std::size_t, int> count;
    std::map<std::size_t, std::int64_t> first;
    std::int64_t last_t = -1;
    while (auto ev = s.pop_before(kNsPerSecond)) {
        if (!count[ev->sensor]++) first[ev->sensor] = ev->sample.t_ns;
        CHECK(ev->sample.t_ns >= last_t);
        last_t = ev->sample.t_ns;
    }
    CHECK(first[0] == 0);
    CHECK(first[1] == 0);
    CHECK(count[0] == 100);
    CHECK(count[1] == 50);
    CHECK_THROWS_AS(start_sync({}), std::logic_error);
}

TEST_CASE("rate fidelity without jitter") {
    for (const auto& spec : reference_sensors()) {
        for (std::int64_t seconds : {1, 7, 60}) {
            std::vector<std::unique_ptr<Source>> src;
            src.push_back(ramp(spec));
            Session s = start_sync(std::move(src));
            std::int64_t n = 0;
            while (s.pop_before(seconds * kNsPerSecond)) ++n;
            CHECK(n == std::llround(double(seconds) * spec.native_rate));
        }
    }
}

TEST_CASE("first-frame latency") {
    const auto w119 = WindowConfig::from_timesteps(20, 119.0);
    CHECK(w119.window_ns == 168067227);
    const auto w6 = WindowConfig::from_timesteps(20, 6.0);
    CHECK(w6.window_ns == 3333333333);

    std::vector<std::unique_ptr<Source>> src;
    src.push_back(ramp(sensor("imu", 119, 9)));
    Session s = start_sync(std::move(src));
    StreamController ctl(s, w119);
    const auto f = ctl.next_frame(kNsPerSecond);
    REQUIRE(f);
    CHECK(f->end_ns == 168067227);
    CHECK(ctl.now_ns() == 168067227);
    CHECK(f->frame.branches[0].time() == 20);
    CHECK(f->last_sample_ns[0] < f->end_ns);
}

TEST_CASE("tumbling windows do not share samples") {
    auto cfg = WindowConfig::from_timesteps(20, 119.0);
    Session s = reference_session();
    const auto frames = stream_frames(s, cfg, 30 * kNsPerSecond);
    REQUIRE(frames.size() > 10);
    for (std::size_t k = 1; k < frames.size(); ++k)
        for (std::size_t i = 0; i < frames[k].first_sample_ns.size(); ++i)
            CHECK(frames[k].first_sample_ns[i] > frames[k - 1].last_sample_ns[i]);
}

TEST_CASE("frame count and alignment") {
    WindowConfig cfg;
    cfg.window_ns = kNsPerSecond;
    cfg.step_ns = kNsPerSecond / 2;
    Session s = reference_session();
    StreamStats stats;
    const auto frames = stream_frames(s, cfg, 20 * kNsPerSecond, &stats);
    CHECK(frames.size() == 39);
    double slowest = 0.0;
    for (const auto& sp : reference_sensors()) slowest = std::max(slowest, sp.period_ns());
    const auto specs = reference_sensors();
    for (const auto& f : frames) {
        for (std::size_t i = 0; i < specs.size(); ++i) {
            CHECK(f.frame.branches[i].time() == std::size_t(cfg.timesteps(specs[i].native_rate)));
            CHECK(double(f.first_sample_ns[i] - f.start_ns) <= slowest);
            CHECK(double(f.start_ns - f.first_sample_ns[i]) <= slowest);
            CHECK(double(f.end_ns - f.last_sample_ns[i]) <= slowest);
            CHECK(f.last_sample_ns[i] < f.end_ns);
        }
    }
    CHECK(stats.events.empty());
}

TEST_CASE("common-rate frames resample onto the target grid") {
    WindowConfig cfg;
    cfg.alignment = Alignment::kCommon;
    cfg.target_rate = 20.0;
    cfg.method = Interp::kLinear;
    Session s = reference_session();
    const auto frames = stream_frames(s, cfg, 5 * kNsPerSecond);
    REQUIRE(!frames.empty());
    for (const auto& f : frames)
        for (std::size_t i = 0; i < f.frame.branches.size(); ++i) {
            const auto& t = f.frame.branches[i];
            REQUIRE(t.time() == 20);
            // every source is the ramp x(t) = t, which linear interpolation
            // reproduces; past the newest sample the edge value is held
            for (std::size_t r = 0; r < 20; ++r) {
                const auto tg = f.start_ns + sample_time_ns(r, 20.0);
                const auto expect = std::min(tg, f.last_sample_ns[i]);
                CHECK(t.at(r, 0, 0) == doctest::Approx(double(expect) * 1e-9));
            }
        }
}

TEST_CASE("conservation over ten minutes with the reference sensors") {
    for (double ppm : {0.0, 200.0}) {
        WindowConfig cfg;
        Session s = reference_session(ppm);
        StreamController ctl(s, cfg);
        const std::int64_t until = 600 * kNsPerSecond;
        while (auto f = ctl.next_frame(until)) {
            for (const auto& c : ctl.stats().sensors) CHECK(c.produced == c.consumed + c.occupancy + c.overflowed);
        }
        ctl.advance_to(until);
        std::uint64_t total = 0;
        for (const auto& c : ctl.stats().sensors) {
            CHECK(c.produced == c.consumed + c.occupancy + c.overflowed);
            CHECK(c.overflowed == 0);
            total += c.produced;
        }
        CHECK(total > 600 * 200);
    }
}

TEST_CASE("an undersized FIFO reports overflow by sensor name") {
    WindowConfig cfg;
    cfg.fifo_depth = 10;
    std::vector<std::unique_ptr<Source>> src;
    src.push_back(ramp(sensor("tof", 50)));
    Session s = start_sync(std::move(src));
    StreamStats stats;
    stream_frames(s, cfg, 3 * kNsPerSecond, &stats);
    REQUIRE(!stats.events.empty());
    bool overflow = false, underfill = false;
    for (const auto& e : stats.events) {
        CHECK(e.sensor == "tof");
        overflow |= e.kind == StreamEvent::Kind::kOverflow;
        underfill |= e.kind == StreamEvent::Kind::kUnderfill;
    }
    CHECK(overflow);
    CHECK(underfill);
    const auto& c = stats.sensors[0];
    CHECK(c.produced == c.consumed + c.occupancy + c.overflowed);
}

TEST_CASE("a source that stops early underfills with the last sample held") {
    WindowConfig cfg;
    cfg.step_ns = cfg.window_ns;
    std::vector<std::unique_ptr<Source>> src;
    src.push_back(ramp(sensor("baro", 10), 15));
    Session s = start_sync(std::move(src));
    StreamStats stats;
    const auto frames = stream_frames(s, cfg, 2 * kNsPerSecond, &stats);
    REQUIRE(frames.size() == 2);
    const auto& t = frames[1].frame.branches[0];
    REQUIRE(t.time() == 10);
    CHECK(t.at(4, 0, 0) == doctest::Approx(1.4));
    CHECK(t.at(9, 0, 0) == doctest::Approx(1.4));
    REQUIRE(stats.events.size() == 1);
    CHECK(stats.events[0].missing == 5);
}

TEST_CASE("window config validation") {
    WindowConfig cfg;
    cfg.step_ns = cfg.window_ns + 1;
    CHECK_THROWS(cfg.validate(reference_sensors()));
    cfg.step_ns = 0;
    CHECK_THROWS(cfg.validate(reference_sensors()));
    WindowConfig tiny;
    tiny.window_ns = 10'000'000;
    tiny.step_ns = tiny.window_ns;
    CHECK_THROWS(tiny.validate(reference_sensors()));  // no gas sample in 10 ms
    CHECK(WindowConfig{}.depth_for(20.0) == 40);
    CHECK(WindowConfig{}.depth_for(1.0) == 3);
}

TEST_CASE("SensorFifo keeps order and refuses to overwrite") {
    SensorFifo fifo(3, 2);
    for (int i = 0; i < 3; ++i) CHECK(fifo.push({i, {double(i), -double(i)}}));
    CHECK(fifo.full());
    CHECK_FALSE(fifo.push({9, {9, 9}}));
    CHECK(fifo.size() == 3);
    fifo.pop();
    CHECK(fifo.push({3, {3, -3}}));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(fifo.time_at(i) == std::int64_t(i + 1));
        CHECK(fifo.values_at(i)[1] == -double(i + 1));
    }
    CHECK(fifo.size() <= fifo.depth());
}

TEST_CASE("resample") {
    const auto constant = stream_of(10.0, 30, [](double) { return 0.75; });
    for (auto m : {Interp::kNearest, Interp::kLinear})
        for (double rate : {3.0, 7.0, 10.0, 25.0})
            for (const auto& s : resample(constant, rate, m)) CHECK(s.values[0] == 0.75);

    const auto ramp10 = stream_of(10.0, 41, [](double t) { return t; });
    const auto down = resample(ramp10, 5.0, Interp::kLinear);
    CHECK(down.size() == 21);
    for (const auto& s : down) CHECK(s.values[0] == doctest::Approx(double(s.t_ns) * 1e-9).epsilon(1e-12));
    const auto up = resample(ramp10, 30.0, Interp::kLinear, 0, 100);
    for (const auto& s : up) CHECK(s.values[0] == doctest::Approx(double(s.t_ns) * 1e-9).epsilon(1e-9));

    const auto s12 = stream_of(12.0, 48, [](double t) { return std::sin(7 * t); });
    const auto s6 = resample(s12, 6.0, Interp::kNearest);
    REQUIRE(s6.size() == 24);
    for (std::size_t k = 0; k < s6.size(); ++k) {
        CHECK(s6[k].t_ns == s12[2 * k].t_ns);
        CHECK(s6[k].values == s12[2 * k].values);
    }
    CHECK_THROWS_AS(resample(s12, 6.0, Interp::kLinear, 0, 25), std::domain_error);
    CHECK_THROWS_AS(resample(s12, 6.0, Interp::kLinear, -1, 2), std::domain_error);
}

TEST_CASE("jitter") {
    std::vector<SensorSample> plain, zero;
    {
        auto src = jitter_model(ramp(sensor("imu", 119)), 0.0, 3);
        auto ref = ramp(sensor("imu", 119));
        for (int i = 0; i < 500; ++i) zero.push_back(*src->next()), plain.push_back(*ref->next());
    }
    CHECK(zero == plain);

    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto src = jitter_model(ramp(sensor("imu", 119)), 100.0, seed);
        std::int64_t n = 0, prev = -1;
        while (true) {
            const auto s = src->next();
            if (s->t_ns >= 60 * kNsPerSecond) break;
            CHECK(s->t_ns > prev);
            prev = s->t_ns;
            ++n;
        }
        CHECK(std::llabs(n - 7140) <= 1);
    }
}

TEST_CASE("frames keep their shape under jitter") {
    auto cfg = WindowConfig::from_timesteps(20, 119.0, 84033613);
    Session s = reference_session(100.0);
    StreamStats stats;
    const auto frames = stream_frames(s, cfg, 60 * kNsPerSecond, &stats);
    REQUIRE(frames.size() > 600);
    const auto specs = reference_sensors();
    for (const auto& f : frames)
        for (std::size_t i = 0; i < specs.size(); ++i)
            CHECK(f.frame.branches[i].time() == std::size_t(cfg.timesteps(specs[i].native_rate)));
}

TEST_CASE("streaming is deterministic") {
    WindowConfig cfg;
    Session a = reference_session(50.0), b = reference_session(50.0);
    const auto fa = stream_frames(a, cfg, 10 * kNsPerSecond);
    const auto fb = stream_frames(b, cfg, 10 * kNsPerSecond);
    REQUIRE(fa.size() == fb.size());
    for (std::size_t k = 0; k < fa.size(); ++k) {
        CHECK(fa[k].first_sample_ns == fb[k].first_sample_ns);
        for (std::size_t i = 0; i < fa[k].frame.branches.size(); ++i)
            CHECK(fa[k].frame.branches[i] == fb[k].frame.branches[i]);
    }
}

TEST_CASE("synthetic recordings") {
    DatasetConfig cfg;
    cfg.sensors = {sensor("optical", 20, 3), sensor("baro", 10, 1)};
    cfg.classes = 4;
    cfg.n_per_class = 3;
    cfg.segment_s = 2.0;
    cfg.seed = 9;
    const auto a = gen_dataset(cfg);
    CHECK(a == gen_dataset(cfg));
    cfg.seed = 10;
    CHECK_FALSE(a == gen_dataset(cfg));
    CHECK(a.segments.size() == 12);
    CHECK(a.duration_ns() == 24 * kNsPerSecond);
    CHECK(a.streams[0].size() == 480);
    std::map<int, int> per_class;
    for (const auto& s : a.segments) ++per_class[s.label];
    for (const auto& [k, n] : per_class) CHECK(n == 3);
    CHECK(a.label_for(0, a.segments[0].end_ns) == a.segments[0].label);
    CHECK(a.label_for(a.segments[0].end_ns - 1, a.segments[0].end_ns + 1) == -1);

    cfg.classes = 1;
    CHECK_THROWS_AS(gen_dataset(cfg), std::invalid_argument);
    cfg.classes = 4;
    cfg.n_per_class = 0;
    CHECK_THROWS_AS(gen_dataset(cfg), std::invalid_argument);
}

TEST_CASE("noise-free informative data is separable by an independent classifier") {
    DatasetConfig cfg;
    cfg.sensors = {sensor("optical", 20, 2)};
    cfg.classes = 6;
    cfg.n_per_class = 8;
    cfg.segment_s = 3.0;
    cfg.noise = 0.0;
    cfg.seed = 3;
    const auto rec = gen_dataset(cfg);
    std::vector<oracles::Vec> tx, vx;
    std::vector<int> ty, vy;
    std::map<int, int> seen;
    const auto& st = rec.streams[0];
    for (const auto& seg : rec.segments) {
        oracles::Vec x;
        std::size_t rows = 0;
        for (const auto& s : st)
            if (s.t_ns >= seg.start_ns && s.t_ns < seg.end_ns) {
                x.insert(x.end(), s.values.begin(), s.values.end());
                ++rows;
            }
        const auto f = oracles::spectral_features(x, rows, 2, 12);
        if (seen[seg.label]++ < 4) tx.push_back(f), ty.push_back(seg.label);
        else vx.push_back(f), vy.push_back(seg.label);
    }
    CHECK(oracles::nearest_centroid_accuracy(tx, ty, vx, vy, cfg.classes) == 1.0);
}

TEST_CASE("uninformative modality carries no class signal") {
    DatasetConfig cfg;
    cfg.sensors = {sensor("optical", 4, 1), sensor("gas", 4, 1)};
    cfg.informative = {true, false};
    cfg.classes = 2;
    cfg.n_per_class = 500;
    cfg.segment_s = 1.0;
    cfg.seed = 4;
    const auto rec = gen_dataset(cfg);
    std::array<oracles::Vec, 2> gas_means, opt_means;
    for (const auto& seg : rec.segments) {
        for (std::size_t s = 0; s < 2; ++s) {
            double sum = 0.0;
            int n = 0;
            for (const auto& smp : rec.streams[s])
                if (smp.t_ns >= seg.start_ns && smp.t_ns < seg.end_ns) sum += smp.values[0], ++n;
            (s == 0 ? opt_means : gas_means)[seg.label].push_back(sum / n);
        }
    }
    CHECK(oracles::welch_p_value(gas_means[0], gas_means[1]) > 0.01);
    CHECK(oracles::welch_p_value(opt_means[0], opt_means[1]) < 0.01);
}

TEST_CASE("replaying a recording reproduces its streams") {
    DatasetConfig cfg;
    cfg.sensors = {sensor("a", 13, 2), sensor("b", 7, 1)};
    cfg.classes = 2;
    cfg.n_per_class = 2;
    cfg.segment_s = 1.0;
    const auto rec = gen_dataset(cfg);
    Session s = replay_session(rec);
    std::vector<std::vector<SensorSample>> got(2);
    while (auto ev = s.pop_before(rec.duration_ns())) got[ev->sensor].push_back(ev->sample);
    CHECK(got == rec.streams);
}
