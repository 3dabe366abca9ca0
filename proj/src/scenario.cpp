// History ingestion, parameter fitting, synthetic instance generation, and
// Monte Carlo replay.  Everything here is deterministic in its inputs: the
// random streams are mt19937_64 seeded from explicit integers, uniforms are
// derived by fixed bit arithmetic (never through library distributions whose
// algorithms are implementation-defined), and reductions use a fixed-shape
// pairwise tree, so identical inputs give byte-identical outputs regardless
// of thread count.

#include "plantsched/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "plantsched/parallel.hpp"
#include "plantsched/specfun.hpp"

namespace plantsched::scenario {

namespace {

using nlohmann::json;

std::string fmt(const char* f, ...) {
    char buf[192];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const char* file, std::size_t row,
                    const char* field) {
    const char* b = s.c_str();
    char* e = nullptr;
    double v = std::strtod(b, &e);
    if (e == b || *e != '\0' || !std::isfinite(v))
        throw ParseError(fmt("%s row %zu: '%s' is not a finite number (%s)",
                             file, row, s.c_str(), field));
    return v;
}

long parse_long(const std::string& s, const char* file, std::size_t row,
                const char* field) {
    const char* b = s.c_str();
    char* e = nullptr;
    long v = std::strtol(b, &e, 10);
    if (e == b || *e != '\0')
        throw ParseError(fmt("%s row %zu: '%s' is not an integer (%s)", file,
                             row, s.c_str(), field));
    return v;
}

// ---------------------------------------------------------------------------
// Deterministic random helpers
// ---------------------------------------------------------------------------

struct Rng {
    std::mt19937_64 eng;

    explicit Rng(std::uint64_t seed) : eng(seed) {}
    Rng(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed),
                          static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream),
                          static_cast<std::uint32_t>(stream >> 32)};
        eng.seed(seq);
    }

    // 53-bit uniform in [0, 1)
    double uni01() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }
    double uni(double a, double b) { return a + (b - a) * uni01(); }
    long pick(long lo, long hi) {  // inclusive ends
        return lo + static_cast<long>(eng() % static_cast<std::uint64_t>(hi - lo + 1));
    }
};

double round2(double x) { return std::round(x * 100.0) / 100.0; }
double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

std::string dump_double(double v) { return fmt("%.17g", v); }

// ---------------------------------------------------------------------------
// Option lookup shared by the samplers
// ---------------------------------------------------------------------------

std::map<std::string, std::pair<int, int>> option_map(
    const factory::FactoryGraph& g) {
    std::map<std::string, std::pair<int, int>> out;
    for (std::size_t n = 0; n < g.workshops.size(); ++n)
        for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p) {
            const std::string& id = g.workshops[n].options[p].id;
            if (out.count(id))
                throw factory::ConsistencyError(
                    fmt("option id '%s' is ambiguous across workshops",
                        id.c_str()));
            out[id] = {static_cast<int>(n), static_cast<int>(p)};
        }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV ingestion / emission
// ---------------------------------------------------------------------------

HistoryBundle load_history_csv(const std::string& loads_csv_text,
                               const std::string& line_csv_text) {
    HistoryBundle out;

    const auto load_lines = split_lines(loads_csv_text);
    if (load_lines.empty())
        throw MissingHour("load history is empty");
    if (load_lines[0] != "hour,sample_kwh")
        throw ParseError(
            fmt("loads csv: expected header 'hour,sample_kwh', got '%s'",
                load_lines[0].c_str()));

    std::map<int, std::vector<double>> samples;
    int max_hour = -1;
    for (std::size_t r = 1; r < load_lines.size(); ++r) {
        if (load_lines[r].empty()) continue;
        const auto f = split_fields(load_lines[r]);
        if (f.size() != 2)
            throw ParseError(fmt("loads csv row %zu: expected 2 fields, got %zu",
                                 r, f.size()));
        const long h = parse_long(f[0], "loads csv", r, "hour");
        if (h < 0)
            throw ParseError(fmt("loads csv row %zu: negative hour %ld", r, h));
        const double v = parse_double(f[1], "loads csv", r, "sample_kwh");
        samples[static_cast<int>(h)].push_back(v);
        max_hour = std::max(max_hour, static_cast<int>(h));
    }
    if (max_hour < 0) throw MissingHour("load history is empty");

    out.load_samples.resize(static_cast<std::size_t>(max_hour) + 1);
    for (int h = 0; h <= max_hour; ++h) {
        auto it = samples.find(h);
        if (it == samples.end())
            throw MissingHour(fmt("load history: hour %d has no samples", h));
        out.load_samples[static_cast<std::size_t>(h)] = std::move(it->second);
    }

    const auto line_lines = split_lines(line_csv_text);
    if (!line_lines.empty()) {
        if (line_lines[0] != "hour,state_id,count,ratio")
            throw ParseError(fmt(
                "line csv: expected header 'hour,state_id,count,ratio', got '%s'",
                line_lines[0].c_str()));
        for (std::size_t r = 1; r < line_lines.size(); ++r) {
            if (line_lines[r].empty()) continue;
            const auto f = split_fields(line_lines[r]);
            if (f.size() != 4)
                throw ParseError(fmt(
                    "line csv row %zu: expected 4 fields, got %zu", r, f.size()));
            LineRecord rec;
            const long h = parse_long(f[0], "line csv", r, "hour");
            if (h < 0 || h > max_hour)
                throw ParseError(fmt(
                    "line csv row %zu: hour %ld outside the load horizon [0, %d]",
                    r, h, max_hour));
            rec.hour = static_cast<int>(h);
            rec.state_id = f[1];
            if (rec.state_id.empty())
                throw ParseError(fmt("line csv row %zu: empty state_id", r));
            rec.count = parse_long(f[2], "line csv", r, "count");
            if (rec.count < 0)
                throw ParseError(
                    fmt("line csv row %zu: negative count %ld", r, rec.count));
            rec.ratio = parse_double(f[3], "line csv", r, "ratio");
            if (rec.ratio < 0.0 || rec.ratio > 1.0)
                throw ParseError(fmt(
                    "line csv row %zu: ratio %s outside [0, 1]", r,
                    f[3].c_str()));
            out.line_history.push_back(std::move(rec));
        }
    }
    return out;
}

std::string save_loads_csv(const HistoryBundle& bundle) {
    std::string out = "hour,sample_kwh\n";
    for (std::size_t h = 0; h < bundle.load_samples.size(); ++h)
        for (double v : bundle.load_samples[h])
            out += fmt("%zu,%s\n", h, dump_double(v).c_str());
    return out;
}

std::string save_line_csv(const HistoryBundle& bundle) {
    std::string out = "hour,state_id,count,ratio\n";
    for (const auto& rec : bundle.line_history)
        out += fmt("%d,%s,%ld,%s\n", rec.hour, rec.state_id.c_str(), rec.count,
                   dump_double(rec.ratio).c_str());
    return out;
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

FittedParams fit_ddu_params(const HistoryBundle& bundle, const FitKnobs& knobs) {
    FittedParams out;

    const std::size_t H = bundle.load_samples.size();
    if (H == 0) throw MissingHour("load history is empty");
    for (std::size_t h = 0; h < H; ++h) {
        if (bundle.load_samples[h].empty())
            throw MissingHour(fmt("load history: hour %zu has no samples", h));
        const auto ms = ddu::estimate_moments(bundle.load_samples[h]);
        out.fr.mu.push_back(ms.first);
        out.fr.sigma.push_back(ms.second);
        out.fr.samples_per_hour.push_back(
            static_cast<long>(bundle.load_samples[h].size()));
    }
    out.fr.gamma1 = knobs.gamma1;
    out.fr.gamma2 = knobs.gamma2;
    out.fr.epsilon = knobs.epsilon;
    out.fr.drift_k = knobs.drift_k;
    out.fr.drift_b = knobs.drift_b;

    // States in first-appearance order; counts summed over hours; acceptance
    // ratio as the count-weighted mean (plain mean when all counts are 0).
    std::map<std::string, std::size_t> index;
    std::vector<long> counts;
    std::vector<double> wsum, rsum;
    std::vector<long> rows;
    std::vector<std::string> ids;
    for (const auto& rec : bundle.line_history) {
        if (rec.count < 0)
            throw ParseError(fmt("line history: negative count for state '%s'",
                                 rec.state_id.c_str()));
        if (rec.ratio < 0.0 || rec.ratio > 1.0)
            throw ParseError(fmt("line history: ratio outside [0, 1] for '%s'",
                                 rec.state_id.c_str()));
        auto it = index.find(rec.state_id);
        std::size_t i;
        if (it == index.end()) {
            i = ids.size();
            index[rec.state_id] = i;
            ids.push_back(rec.state_id);
            counts.push_back(0);
            wsum.push_back(0.0);
            rsum.push_back(0.0);
            rows.push_back(0);
        } else {
            i = it->second;
        }
        counts[i] += rec.count;
        wsum[i] += static_cast<double>(rec.count) * rec.ratio;
        rsum[i] += rec.ratio;
        ++rows[i];
    }

    const std::size_t k = ids.size();
    for (std::size_t i = 0; i < k; ++i) {
        ddu::IdmState st;
        st.id = ids[i];
        // The id spells the option combination: members joined with '+'.
        std::string cur;
        for (char c : ids[i] + "+") {
            if (c == '+') {
                if (cur.empty())
                    throw ParseError(fmt(
                        "state id '%s' has an empty option segment",
                        ids[i].c_str()));
                st.pattern.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        st.prior = 1.0 / static_cast<double>(k);
        out.demand.states.push_back(std::move(st));
        out.demand.ratios.push_back(counts[i] > 0
                                        ? wsum[i] / static_cast<double>(counts[i])
                                        : (rows[i] > 0 ? rsum[i] /
                                                             static_cast<double>(rows[i])
                                                       : 0.0));
        out.demand.hist_counts.push_back(counts[i]);
        out.demand.rt_counts.push_back(0);
    }
    out.demand.s = knobs.s;
    out.demand.gamma = knobs.gamma;
    out.demand.threshold = knobs.threshold;
    return out;
}

// ---------------------------------------------------------------------------
// Uncertainty JSON round trip
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void ufail(const std::string& what) { throw ParseError(what); }

void expect_keys(const json& o, const char* path,
                 std::initializer_list<const char*> keys) {
    for (auto it = o.begin(); it != o.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) ufail(fmt("%s: unknown key '%s'", path, it.key().c_str()));
    }
}

const json& need(const json& o, const char* key, const char* path) {
    auto it = o.find(key);
    if (it == o.end()) ufail(fmt("%s.%s: missing required key", path, key));
    return *it;
}

double jnum(const json& j, const char* path) {
    if (!j.is_number()) ufail(fmt("%s: expected a number", path));
    return j.get<double>();
}

std::vector<double> jvecd(const json& j, const char* path) {
    if (!j.is_array()) ufail(fmt("%s: expected an array", path));
    std::vector<double> out;
    for (const auto& e : j) out.push_back(jnum(e, path));
    return out;
}

std::vector<long> jvecl(const json& j, const char* path) {
    if (!j.is_array()) ufail(fmt("%s: expected an array", path));
    std::vector<long> out;
    for (const auto& e : j) {
        if (!e.is_number_integer()) ufail(fmt("%s: expected integers", path));
        out.push_back(e.get<long>());
    }
    return out;
}

std::vector<std::string> jvecs(const json& j, const char* path) {
    if (!j.is_array()) ufail(fmt("%s: expected an array", path));
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) ufail(fmt("%s: expected strings", path));
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace

std::string save_uncertainty(const ddccg::UncertaintyModel& um) {
    json j;
    j["fr"] = {{"mu", um.fr.mu},
               {"sigma", um.fr.sigma},
               {"samples_per_hour", um.fr.samples_per_hour},
               {"drift_k", um.fr.drift_k},
               {"drift_b", um.fr.drift_b},
               {"gamma1", um.fr.gamma1},
               {"gamma2", um.fr.gamma2},
               {"epsilon", um.fr.epsilon}};
    j["calibration"] = um.calibration == ddu::FrCalibration::Gaussian
                           ? "gaussian"
                           : "distribution_free";
    json floors = json::object();
    for (const auto& kv : um.yields.floors) floors[kv.first] = kv.second;
    json combos = json::array();
    for (const auto& c : um.yields.combos)
        combos.push_back({{"members", c.members}, {"delta", c.delta}});
    j["yields"] = {{"floors", floors},
                   {"combos", combos},
                   {"corrected", um.yields.corrected}};
    json states = json::array();
    for (const auto& st : um.demand.states)
        states.push_back(
            {{"id", st.id}, {"pattern", st.pattern}, {"prior", st.prior}});
    j["demand"] = {{"states", states},
                   {"ratios", um.demand.ratios},
                   {"hist_counts", um.demand.hist_counts},
                   {"rt_counts", um.demand.rt_counts},
                   {"s", um.demand.s},
                   {"gamma", um.demand.gamma},
                   {"threshold", um.demand.threshold}};
    return j.dump(2) + "\n";
}

ddccg::UncertaintyModel load_uncertainty(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        ufail(fmt("uncertainty json: %s", e.what()));
    }
    if (!j.is_object()) ufail("uncertainty json: top level must be an object");
    expect_keys(j, "$", {"fr", "calibration", "yields", "demand"});

    ddccg::UncertaintyModel um;

    const json& fr = need(j, "fr", "$");
    expect_keys(fr, "$.fr",
                {"mu", "sigma", "samples_per_hour", "drift_k", "drift_b",
                 "gamma1", "gamma2", "epsilon"});
    um.fr.mu = jvecd(need(fr, "mu", "$.fr"), "$.fr.mu");
    um.fr.sigma = jvecd(need(fr, "sigma", "$.fr"), "$.fr.sigma");
    um.fr.samples_per_hour =
        jvecl(need(fr, "samples_per_hour", "$.fr"), "$.fr.samples_per_hour");
    um.fr.drift_k = jnum(need(fr, "drift_k", "$.fr"), "$.fr.drift_k");
    um.fr.drift_b = jnum(need(fr, "drift_b", "$.fr"), "$.fr.drift_b");
    um.fr.gamma1 = jnum(need(fr, "gamma1", "$.fr"), "$.fr.gamma1");
    um.fr.gamma2 = jnum(need(fr, "gamma2", "$.fr"), "$.fr.gamma2");
    um.fr.epsilon = jnum(need(fr, "epsilon", "$.fr"), "$.fr.epsilon");
    if (um.fr.sigma.size() != um.fr.mu.size() ||
        um.fr.samples_per_hour.size() != um.fr.mu.size())
        ufail("$.fr: mu, sigma, samples_per_hour must have equal lengths");

    const json& cal = need(j, "calibration", "$");
    if (!cal.is_string()) ufail("$.calibration: expected a string");
    const std::string cs = cal.get<std::string>();
    if (cs == "gaussian")
        um.calibration = ddu::FrCalibration::Gaussian;
    else if (cs == "distribution_free")
        um.calibration = ddu::FrCalibration::DistributionFree;
    else
        ufail(fmt("$.calibration: unknown value '%s'", cs.c_str()));

    const json& yl = need(j, "yields", "$");
    expect_keys(yl, "$.yields", {"floors", "combos", "corrected"});
    const json& fl = need(yl, "floors", "$.yields");
    if (!fl.is_object()) ufail("$.yields.floors: expected an object");
    for (auto it = fl.begin(); it != fl.end(); ++it)
        um.yields.floors[it.key()] = jnum(it.value(), "$.yields.floors");
    const json& cb = need(yl, "combos", "$.yields");
    if (!cb.is_array()) ufail("$.yields.combos: expected an array");
    for (const auto& c : cb) {
        expect_keys(c, "$.yields.combos[]", {"members", "delta"});
        ddu::YieldCombo yc;
        yc.members = jvecs(need(c, "members", "$.yields.combos[]"),
                           "$.yields.combos[].members");
        yc.delta = jnum(need(c, "delta", "$.yields.combos[]"),
                        "$.yields.combos[].delta");
        um.yields.combos.push_back(std::move(yc));
    }
    um.yields.corrected =
        jvecs(need(yl, "corrected", "$.yields"), "$.yields.corrected");

    const json& dm = need(j, "demand", "$");
    expect_keys(dm, "$.demand",
                {"states", "ratios", "hist_counts", "rt_counts", "s", "gamma",
                 "threshold"});
    const json& sts = need(dm, "states", "$.demand");
    if (!sts.is_array()) ufail("$.demand.states: expected an array");
    for (const auto& s : sts) {
        expect_keys(s, "$.demand.states[]", {"id", "pattern", "prior"});
        ddu::IdmState st;
        const json& id = need(s, "id", "$.demand.states[]");
        if (!id.is_string()) ufail("$.demand.states[].id: expected a string");
        st.id = id.get<std::string>();
        st.pattern = jvecs(need(s, "pattern", "$.demand.states[]"),
                           "$.demand.states[].pattern");
        st.prior = jnum(need(s, "prior", "$.demand.states[]"),
                        "$.demand.states[].prior");
        um.demand.states.push_back(std::move(st));
    }
    um.demand.ratios = jvecd(need(dm, "ratios", "$.demand"), "$.demand.ratios");
    um.demand.hist_counts =
        jvecl(need(dm, "hist_counts", "$.demand"), "$.demand.hist_counts");
    um.demand.rt_counts =
        jvecl(need(dm, "rt_counts", "$.demand"), "$.demand.rt_counts");
    um.demand.s = jnum(need(dm, "s", "$.demand"), "$.demand.s");
    um.demand.gamma = jnum(need(dm, "gamma", "$.demand"), "$.demand.gamma");
    um.demand.threshold =
        jnum(need(dm, "threshold", "$.demand"), "$.demand.threshold");
    if (um.demand.ratios.size() != um.demand.states.size() ||
        um.demand.hist_counts.size() != um.demand.states.size() ||
        um.demand.rt_counts.size() != um.demand.states.size())
        ufail("$.demand: states, ratios, and counts must have equal lengths");
    return um;
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

SyntheticInstance gen_synthetic(const SyntheticConfig& cfg) {
    if (cfg.workshops < 1 || cfg.options_per_workshop < 1 || cfg.horizon < 1 ||
        cfg.samples_per_hour < 1)
        throw std::invalid_argument(
            "gen_synthetic: workshops, options, horizon, samples must be >= 1");
    if (cfg.ddu_intensity < 0.0 || cfg.dalpha < 0.0)
        throw std::invalid_argument(
            "gen_synthetic: intensity knobs must be nonnegative");
    if (!(cfg.epsilon > 0.0) || !(cfg.epsilon < 1.0) || !(cfg.gamma > 0.0) ||
        !(cfg.gamma < 1.0))
        throw std::invalid_argument(
            "gen_synthetic: epsilon and gamma must lie in (0, 1)");

    Rng rng(cfg.seed);
    const int W = cfg.workshops;
    const int P = cfg.options_per_workshop;
    const int H = cfg.horizon;
    const double inten = cfg.ddu_intensity;

    SyntheticInstance inst;
    factory::FactoryGraph& g = inst.graph;
    g.horizon = H;

    // Buffer chain raw -> b1 -> ... -> fin, plus a byproduct outlet fed by
    // the first workshop.
    std::vector<std::string> chain;
    chain.push_back("raw");
    for (int i = 1; i < W; ++i) chain.push_back(fmt("b%d", i));
    chain.push_back("fin");
    for (const auto& id : chain) {
        factory::Buffer b;
        b.id = id;
        b.initial_stock = 0.0;  // planted below
        b.transport_batch = static_cast<int>(rng.pick(1, 2));
        b.transport_time = round2(rng.uni(0.05, 0.3));
        b.is_main_outlet = (id == "fin");
        g.buffers.push_back(std::move(b));
    }
    {
        factory::Buffer b;
        b.id = "byp";
        b.initial_stock = 0.0;
        b.transport_batch = 1;
        b.transport_time = round2(rng.uni(0.05, 0.2));
        b.is_byproduct_outlet = true;
        g.buffers.push_back(std::move(b));
    }

    for (int n = 0; n < W; ++n) {
        factory::Workshop w;
        w.id = fmt("shop%d", n);
        w.location_x = static_cast<double>(n);
        w.location_y = 0.0;
        w.upstream.push_back(chain[static_cast<std::size_t>(n)]);
        w.downstream.push_back(chain[static_cast<std::size_t>(n) + 1]);
        if (n == 0) w.downstream.push_back("byp");
        for (int p = 0; p < P; ++p) {
            factory::EquipmentOption o;
            o.id = fmt("w%d_o%d", n, p);
            o.time_cost = round2(rng.uni(0.7, 1.5));
            o.energy_cost = round2(rng.uni(2.0, 6.0));
            o.output_qty = static_cast<int>(rng.pick(1, 2));
            o.input_qty = static_cast<int>(rng.pick(1, 2));
            o.min_uptime = 1;
            o.max_daily_uses = H;  // adjusted after planting
            w.options.push_back(std::move(o));
        }
        g.workshops.push_back(std::move(w));
    }

    factory::EnergySystem& es = g.energy;
    es.bess_capacity = round2(rng.uni(4.0, 10.0));
    es.bess_initial = round2(es.bess_capacity / 2.0);
    es.discharge_eff = 0.9;
    es.charge_eff = 0.85;
    es.ramp_lo = 0.0;
    es.ramp_hi = round2(rng.uni(3.0, 8.0));
    es.degr_coeff = round3(rng.uni(0.005, 0.02));
    es.sale_price_main = round2(rng.uni(3.0, 8.0));
    es.sale_price_by = round2(rng.uni(0.8, 1.5));
    es.usage_rate = round2(rng.uni(1.0, 3.0));
    for (int h = 0; h < H; ++h) {
        es.rtp.push_back(round2(h % 2 ? rng.uni(0.8, 1.2) : rng.uni(0.4, 0.7)));
        es.der_output.push_back(round2(rng.uni(0.0, 2.5)));
    }

    // Planted schedule: each shop runs a random option most hours.
    auto& on = inst.planted.on;
    on.assign(static_cast<std::size_t>(H), {});
    for (int h = 0; h < H; ++h) {
        on[static_cast<std::size_t>(h)].resize(static_cast<std::size_t>(W));
        for (int n = 0; n < W; ++n) {
            on[static_cast<std::size_t>(h)][static_cast<std::size_t>(n)]
                .assign(static_cast<std::size_t>(P), 0);
            if (rng.uni01() < 0.8) {
                const long p = rng.pick(0, P - 1);
                on[static_cast<std::size_t>(h)][static_cast<std::size_t>(n)]
                  [static_cast<std::size_t>(p)] = 1;
            }
        }
    }

    // Initial stocks cover the planted schedule's worst cumulative
    // draw-down at nominal yields, so it simulates feasibly; extra raw
    // headroom leaves the solver room to pick other schedules.
    for (std::size_t m = 0; m < g.buffers.size(); ++m) {
        double cum = 0.0, lowest = 0.0;
        for (int h = 0; h < H; ++h) {
            double net = 0.0;
            for (int n = 0; n < W; ++n)
                for (int p = 0; p < P; ++p) {
                    if (!on[static_cast<std::size_t>(h)]
                           [static_cast<std::size_t>(n)]
                           [static_cast<std::size_t>(p)])
                        continue;
                    const auto& o = g.workshops[static_cast<std::size_t>(n)]
                                        .options[static_cast<std::size_t>(p)];
                    for (const auto& d :
                         g.workshops[static_cast<std::size_t>(n)].downstream)
                        if (d == g.buffers[m].id) net += o.output_qty;
                    for (const auto& u :
                         g.workshops[static_cast<std::size_t>(n)].upstream)
                        if (u == g.buffers[m].id) net -= o.input_qty;
                }
            cum += net;
            lowest = std::min(lowest, cum);
        }
        g.buffers[m].initial_stock = -lowest;
        if (g.buffers[m].id == "raw")
            g.buffers[m].initial_stock += static_cast<double>(rng.pick(0, 2));
    }

    // Daily caps: never below the planted usage, sometimes binding above it.
    for (int n = 0; n < W; ++n)
        for (int p = 0; p < P; ++p) {
            int used = 0;
            for (int h = 0; h < H; ++h)
                used += on[static_cast<std::size_t>(h)]
                          [static_cast<std::size_t>(n)]
                          [static_cast<std::size_t>(p)];
            g.workshops[static_cast<std::size_t>(n)]
                .options[static_cast<std::size_t>(p)]
                .max_daily_uses =
                std::max(used, static_cast<int>(rng.pick(1, H)));
        }

    // Load history around the planted consumption profile.
    HistoryBundle& bundle = inst.bundle;
    bundle.load_samples.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
        double base = rng.uni(0.5, 2.0);
        for (int n = 0; n < W; ++n)
            for (int p = 0; p < P; ++p)
                if (on[static_cast<std::size_t>(h)][static_cast<std::size_t>(n)]
                      [static_cast<std::size_t>(p)])
                    base += g.workshops[static_cast<std::size_t>(n)]
                                .options[static_cast<std::size_t>(p)]
                                .energy_cost;
        const double mu = round2(base);
        const double sig = inten > 0.0
                               ? round2(rng.uni(0.08, 0.2) * std::max(mu, 1.0))
                               : 0.0;
        auto& col = bundle.load_samples[static_cast<std::size_t>(h)];
        for (int t = 0; t < cfg.samples_per_hour; ++t) {
            if (sig == 0.0) {
                col.push_back(mu);
            } else {
                const double u =
                    std::min(1.0 - 1e-12, std::max(1e-12, rng.uni01()));
                col.push_back(mu + sig * ddu::normal_quantile(u));
            }
        }
    }

    // Line-structure history: one or two single-option states of the first
    // workshop, plus an occasional cross-shop pair state.
    if (inten > 0.0) {
        std::vector<std::string> state_ids;
        state_ids.push_back("w0_o0");
        if (P >= 2) state_ids.push_back("w0_o1");
        if (W >= 2 && rng.uni01() < 0.5) state_ids.push_back("w0_o0+w1_o0");
        for (const auto& sid : state_ids) {
            const double ratio = round2(rng.uni(0.5, 1.0));
            const long nrows = rng.pick(1, std::min(3L, static_cast<long>(H)));
            for (long rrow = 0; rrow < nrows; ++rrow) {
                LineRecord rec;
                rec.hour = static_cast<int>(rng.pick(0, H - 1));
                rec.state_id = sid;
                rec.count = rng.pick(1, 6);
                rec.ratio = ratio;
                bundle.line_history.push_back(std::move(rec));
            }
        }
    }
    bundle.rtp_profile = es.rtp;

    // Corrected-yield sets: a floor per corrected option, lowered further by
    // cross-shop run combinations.
    ddu::YieldAmbiguity& ya = inst.uncertainty.yields;
    if (inten > 0.0) {
        for (int n = 0; n < W; ++n)
            for (int p = 0; p < P; ++p)
                if ((n == 0 && p == 0) || rng.uni01() < 0.5)
                    ya.corrected.push_back(fmt("w%d_o%d", n, p));
        const long ncombo = rng.pick(1, 2);
        double shift_down = 0.0;
        for (long c = 0; c < ncombo; ++c) {
            ddu::YieldCombo yc;
            if (W >= 2) {
                const long n2 = rng.pick(1, W - 1);
                yc.members.push_back(fmt("w0_o%ld", rng.pick(0, P - 1)));
                yc.members.push_back(fmt("w%ld_o%ld", n2, rng.pick(0, P - 1)));
            } else {
                yc.members.push_back(fmt("w0_o%ld", rng.pick(0, P - 1)));
            }
            yc.delta = round3(cfg.dalpha * inten * rng.uni(0.4, 1.0));
            if (yc.delta > 0.0) {
                shift_down += yc.delta;
                ya.combos.push_back(std::move(yc));
            }
        }
        for (const auto& id : ya.corrected) {
            const double lo = std::min(0.9, shift_down + 0.05);
            ya.floors[id] = round2(rng.uni(lo, 0.92));
        }
    }

    FitKnobs knobs;
    knobs.gamma1 = cfg.gamma1 * inten;
    knobs.gamma2 = cfg.gamma2 * inten;
    knobs.epsilon = cfg.epsilon;
    knobs.s = 1.0;
    knobs.gamma = cfg.gamma;
    knobs.threshold = 0.0;
    FittedParams fitted = fit_ddu_params(bundle, knobs);
    inst.uncertainty.fr = std::move(fitted.fr);
    inst.uncertainty.demand = std::move(fitted.demand);
    inst.uncertainty.calibration = ddu::FrCalibration::Gaussian;
    return inst;
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

factory::UncertaintyRealization sample_realization(
    const factory::FactoryGraph& g, const ddccg::UncertaintyModel& um,
    const factory::ScheduleDecision& sched, std::uint64_t seed, long trial,
    const McOptions& opts) {
    const int H = g.horizon;
    if (um.fr.horizon() != static_cast<std::size_t>(H))
        throw factory::ConsistencyError(
            fmt("fitted load model covers %zu hours but the plant runs %d",
                um.fr.horizon(), H));
    if (sched.on.size() != static_cast<std::size_t>(H))
        throw factory::ConsistencyError("schedule horizon mismatch");

    const auto opts_by_id = option_map(g);
    auto locate = [&](const std::string& id) {
        auto it = opts_by_id.find(id);
        if (it == opts_by_id.end())
            throw factory::ConsistencyError(
                fmt("unknown option id '%s' in the uncertainty model",
                    id.c_str()));
        return it->second;
    };

    auto running = [&](int h, const std::pair<int, int>& np) {
        const auto& row = sched.on[static_cast<std::size_t>(h)];
        if (np.first < 0 || static_cast<std::size_t>(np.first) >= row.size())
            throw factory::ConsistencyError("schedule workshop mismatch");
        const auto& prow = row[static_cast<std::size_t>(np.first)];
        if (np.second < 0 || static_cast<std::size_t>(np.second) >= prow.size())
            throw factory::ConsistencyError("schedule option mismatch");
        return prow[static_cast<std::size_t>(np.second)] != 0;
    };

    // Resolve ids once.
    std::vector<std::pair<std::pair<int, int>, double>> corrected;  // loc, floor
    for (const auto& id : um.yields.corrected) {
        auto it = um.yields.floors.find(id);
        if (it == um.yields.floors.end())
            throw factory::ConsistencyError(
                fmt("corrected option '%s' has no floor", id.c_str()));
        corrected.push_back({locate(id), it->second});
    }
    std::sort(corrected.begin(), corrected.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::vector<std::pair<int, int>>> combo_members;
    for (const auto& c : um.yields.combos) {
        std::vector<std::pair<int, int>> ms;
        for (const auto& id : c.members) ms.push_back(locate(id));
        combo_members.push_back(std::move(ms));
    }
    std::vector<std::vector<std::pair<int, int>>> state_members;
    for (const auto& st : um.demand.states) {
        std::vector<std::pair<int, int>> ms;
        for (const auto& id : st.pattern) ms.push_back(locate(id));
        state_members.push_back(std::move(ms));
    }

    // Credal posterior mean acceptance per state.
    const std::size_t K = um.demand.states.size();
    std::vector<double> theta_hat(K, 0.0);
    if (K > 0) {
        double total = 0.0, prior_mass = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            double c = 0.0;
            if (i < um.demand.hist_counts.size())
                c += static_cast<double>(um.demand.hist_counts[i]);
            if (i < um.demand.rt_counts.size())
                c += static_cast<double>(um.demand.rt_counts[i]);
            total += c;
            prior_mass += um.demand.states[i].prior;
        }
        if (prior_mass > 1e-9 && std::abs(prior_mass - 1.0) > 1e-9)
            throw factory::ConsistencyError(
                "state priors must sum to 1 (or all be 0)");
        for (std::size_t i = 0; i < K; ++i) {
            double c = 0.0;
            if (i < um.demand.hist_counts.size())
                c += static_cast<double>(um.demand.hist_counts[i]);
            if (i < um.demand.rt_counts.size())
                c += static_cast<double>(um.demand.rt_counts[i]);
            theta_hat[i] = (c + um.demand.s * um.demand.states[i].prior) /
                           (um.demand.s + total);
        }
    }

    Rng rng(seed, static_cast<std::uint64_t>(trial));

    factory::UncertaintyRealization real;
    real.expected_load.assign(static_cast<std::size_t>(H), 0.0);
    real.zeta.assign(static_cast<std::size_t>(H), 0.0);
    real.yield.resize(static_cast<std::size_t>(H));

    const double tail = ddu::normal_cdf(4.0) - ddu::normal_cdf(-4.0);
    const double tail_lo = ddu::normal_cdf(-4.0);

    for (int h = 0; h < H; ++h) {
        const std::size_t hh = static_cast<std::size_t>(h);
        const double mu = um.fr.mu[hh];
        const double sig = um.fr.sigma[hh];

        // Load: draw the distribution's moments uniformly from the fitted
        // set, then one value from the chosen family.
        const double r = std::sqrt(std::max(0.0, um.fr.gamma2 * sig));
        const double mbar =
            std::min(std::sqrt(std::max(0.0, um.fr.gamma1 * sig)), r);
        const double u1 = rng.uni01();
        const double u2 = rng.uni01();
        const double u3 = rng.uni01();
        const double mshift = mbar * (2.0 * u1 - 1.0);
        const double smax =
            std::sqrt(std::max(0.0, r * r - mshift * mshift));
        const double s1 = smax * u2;
        const double center =
            mu - (um.fr.drift_k * mu + um.fr.drift_b);
        const double mean1 = center + mshift;

        double x;
        if (opts.law == LoadLaw::TruncatedGaussian) {
            if (s1 == 0.0) {
                x = mean1;
            } else {
                const double q = tail_lo + u3 * tail;
                x = mean1 + s1 * ddu::normal_quantile(q);
            }
        } else {
            // Two-point law with the drawn moments whose upper atom sits just
            // beyond the deviation box edge.
            const double delta =
                ddu::fr_delta(um.fr, h, mu, um.calibration);
            const double lam_box = mu + delta - mean1;
            const double step =
                std::max(1e-6 * (1.0 + std::abs(mu + delta)), 4.0 * opts.box_tol);
            const double lam = std::max(lam_box, 0.0) + step;
            const double mass = s1 * s1 / (s1 * s1 + lam * lam);
            x = (u3 < mass) ? mean1 + lam
                            : mean1 - (s1 == 0.0 ? 0.0 : s1 * s1 / lam);
        }
        real.expected_load[hh] = x;

        // Yields: corrected options fall uniformly between their (combo
        // shifted) floor and 1.
        auto& yh = real.yield[hh];
        yh.resize(g.workshops.size());
        for (std::size_t n = 0; n < g.workshops.size(); ++n)
            yh[n].assign(g.workshops[n].options.size(), 1.0);
        double combo_shift = 0.0;
        for (std::size_t c = 0; c < combo_members.size(); ++c) {
            bool active = !combo_members[c].empty();
            for (const auto& mref : combo_members[c])
                if (!running(h, mref)) {
                    active = false;
                    break;
                }
            if (active) combo_shift += um.yields.combos[c].delta;
        }
        for (const auto& [loc, base_floor] : corrected) {
            const double floor =
                std::min(1.0, std::max(0.0, base_floor - combo_shift));
            yh[static_cast<std::size_t>(loc.first)]
              [static_cast<std::size_t>(loc.second)] =
                floor + (1.0 - floor) * rng.uni01();
        }

        // Acceptance: posterior-mean weights of the states active this hour.
        double z = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            bool active = !state_members[i].empty();
            for (const auto& mref : state_members[i])
                if (!running(h, mref)) {
                    active = false;
                    break;
                }
            if (active && i < um.demand.ratios.size())
                z += um.demand.ratios[i] * theta_hat[i];
        }
        real.zeta[hh] = z;
    }
    return real;
}

std::string McSummary::to_text() const {
    std::string out;
    out += fmt("trials: %ld\n", trials);
    out += fmt("mean_objective: %.10g\n", mean_objective);
    out += fmt("std_objective: %.10g\n", std_objective);
    out += fmt("q05: %.10g\n", q05);
    out += fmt("q95: %.10g\n", q95);
    out += fmt("fr_violation_rate: %.10g\n", fr_violation_rate);
    out += fmt("mean_equipment: %.10g\n", mean_equipment);
    out += fmt("mean_degradation: %.10g\n", mean_degradation);
    out += fmt("mean_purchase: %.10g\n", mean_purchase);
    out += fmt("mean_reg_penalty: %.10g\n", mean_reg_penalty);
    out += fmt("mean_main_revenue: %.10g\n", mean_main_revenue);
    out += fmt("mean_by_revenue: %.10g\n", mean_by_revenue);
    return out;
}

namespace {

double quantile_sorted(const std::vector<double>& s, double q) {
    if (s.empty()) return 0.0;
    const double pos = q * static_cast<double>(s.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= s.size()) return s.back();
    const double f = pos - static_cast<double>(lo);
    return s[lo] + f * (s[lo + 1] - s[lo]);
}

}  // namespace

McSummary monte_carlo_eval(const factory::FactoryGraph& g,
                           const ddccg::UncertaintyModel& um,
                           const CoSchedule& co, long n, std::uint64_t seed,
                           const McOptions& opts) {
    if (n < 1)
        throw std::invalid_argument("monte_carlo_eval: need at least one trial");
    const int H = g.horizon;
    if (um.fr.horizon() != static_cast<std::size_t>(H))
        throw factory::ConsistencyError(
            fmt("fitted load model covers %zu hours but the plant runs %d",
                um.fr.horizon(), H));

    // Deviation box shared with the robust engine (validates the model too).
    std::vector<double> delta(static_cast<std::size_t>(H), 0.0);
    for (int h = 0; h < H; ++h)
        delta[static_cast<std::size_t>(h)] =
            ddu::fr_delta(um.fr, h, um.fr.mu[static_cast<std::size_t>(h)],
                          um.calibration);

    const std::size_t N = static_cast<std::size_t>(n);
    std::vector<double> obj(N), equip(N), degr(N), pur(N), reg(N), mrev(N),
        brev(N), viol(N);
    std::vector<std::string> errors(N);

    auto run_trial = [&](std::size_t i) {
        const auto real = sample_realization(g, um, co.schedule, seed,
                                             static_cast<long>(i), opts);
        const auto rep =
            factory::simulate_schedule(g, co.schedule, co.dispatch, real);
        obj[i] = rep.objective;
        equip[i] = rep.equipment_cost;
        degr[i] = rep.degradation_cost;
        pur[i] = rep.purchase_cost;
        reg[i] = rep.reg_penalty;
        mrev[i] = rep.main_revenue;
        brev[i] = rep.by_revenue;
        long v = 0;
        for (int h = 0; h < H; ++h) {
            const std::size_t hh = static_cast<std::size_t>(h);
            if (std::abs(real.expected_load[hh] - um.fr.mu[hh]) >
                delta[hh] + opts.box_tol)
                ++v;
        }
        viol[i] = H > 0 ? static_cast<double>(v) / static_cast<double>(H) : 0.0;
    };

    // The first trial runs unguarded so configuration errors keep their
    // type; later trials only fail on realization-specific infeasibility.
    run_trial(0);
    parallel_for(
        N - 1,
        [&](std::size_t k) {
            const std::size_t i = k + 1;
            try {
                run_trial(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        },
        opts.parallel);
    for (std::size_t i = 1; i < N; ++i)
        if (!errors[i].empty())
            throw factory::InfeasibleSchedule(
                fmt("trial %zu: %s", i, errors[i].c_str()));

    McSummary s;
    s.trials = n;
    const double dn = static_cast<double>(n);
    s.mean_objective = pairwise_sum(obj) / dn;
    s.mean_equipment = pairwise_sum(equip) / dn;
    s.mean_degradation = pairwise_sum(degr) / dn;
    s.mean_purchase = pairwise_sum(pur) / dn;
    s.mean_reg_penalty = pairwise_sum(reg) / dn;
    s.mean_main_revenue = pairwise_sum(mrev) / dn;
    s.mean_by_revenue = pairwise_sum(brev) / dn;
    s.fr_violation_rate = pairwise_sum(viol) / dn;

    std::vector<double> dev(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double d = obj[i] - s.mean_objective;
        dev[i] = d * d;
    }
    s.std_objective = std::sqrt(pairwise_sum(dev) / dn);

    std::vector<double> sorted = obj;
    std::sort(sorted.begin(), sorted.end());
    s.q05 = quantile_sorted(sorted, 0.05);
    s.q95 = quantile_sorted(sorted, 0.95);
    return s;
}

factory::CostReport eval_nominal(const factory::FactoryGraph& g,
                                 const ddccg::UncertaintyModel& um,
                                 const factory::ScheduleDecision& x) {
    auto ctx = ddccg::build_master(g, um);
    if (x.on.size() != ctx.run_idx.size())
        throw factory::ConsistencyError("schedule horizon mismatch");
    for (std::size_t h = 0; h < ctx.run_idx.size(); ++h) {
        if (x.on[h].size() != ctx.run_idx[h].size())
            throw factory::ConsistencyError("schedule workshop mismatch");
        for (std::size_t n = 0; n < ctx.run_idx[h].size(); ++n) {
            if (x.on[h][n].size() != ctx.run_idx[h][n].size())
                throw factory::ConsistencyError("schedule option mismatch");
            for (std::size_t p = 0; p < ctx.run_idx[h][n].size(); ++p) {
                auto& v = ctx.model.var_mutable(ctx.run_idx[h][n][p]);
                v.lo = v.up = static_cast<double>(x.on[h][n][p]);
            }
        }
    }
    ddccg::WorstCase nominal;
    nominal.tau_yield = 0;
    nominal.tau_zeta = -1;
    for (const auto& st : ctx.states)
        nominal.zeta_state_values.push_back(0.5 * (st.lo + st.hi));
    nominal.load_dev.assign(static_cast<std::size_t>(ctx.horizon), 0.0);
    ddccg::add_cuts(ctx, nominal, true);
    const auto sol = opt::solve_milp(ctx.model);
    if (sol.status != opt::SolveStatus::Optimal)
        throw factory::InfeasibleSchedule(
            "the schedule admits no feasible dispatch at the nominal point");

    factory::EnergyDispatch d;
    auto pull = [&](const char* stem, int h) {
        const int idx = ctx.model.var_index(fmt("s0_%s_h%d", stem, h));
        return idx < 0 ? 0.0 : sol.values[static_cast<std::size_t>(idx)];
    };
    factory::ScheduleDecision xs = x;
    xs.sell_by.clear();
    for (int h = 0; h < ctx.horizon; ++h) {
        d.storage_out.push_back(pull("bdis", h));
        d.local_use.push_back(pull("deru", h));
        d.storage_in.push_back(pull("bchg", h));
        if (ctx.outlet >= 0) xs.sell_by.push_back(pull("sell", h));
    }

    factory::UncertaintyRealization real;
    real.yield.resize(static_cast<std::size_t>(g.horizon));
    for (auto& yh : real.yield) {
        yh.resize(g.workshops.size());
        for (std::size_t n = 0; n < g.workshops.size(); ++n)
            yh[n].assign(g.workshops[n].options.size(), 1.0);
    }
    real.expected_load = um.fr.mu;
    real.zeta.assign(static_cast<std::size_t>(g.horizon), 0.0);
    for (int h = 0; h < g.horizon; ++h) {
        const std::size_t hh = static_cast<std::size_t>(h);
        double z = 0.0;
        for (const auto& st : ctx.states) {
            bool on_all = true;
            for (auto [n, p] : st.members)
                if (!x.on[hh][static_cast<std::size_t>(n)]
                         [static_cast<std::size_t>(p)])
                    on_all = false;
            if (on_all) z += st.weight * 0.5 * (st.lo + st.hi);
        }
        real.zeta[hh] = z;
    }
    return factory::simulate_schedule(g, xs, d, real);
}

}  // namespace plantsched::scenario
