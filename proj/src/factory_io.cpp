// Strict JSON loading/saving for the factory data model.  Strict mode rejects
// unknown keys with the offending path; lenient mode ignores them.  All value
// and cross-reference validation happens here so the rest of the code can
// assume a coherent FactoryGraph.

#include <cmath>
#include <set>
#include <string>

#include "json.hpp"
#include "plantsched/factory.hpp"

namespace plantsched::factory {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw SchemaError(path + ": " + what);
}

const json* find(const json& o, const char* key) {
    auto it = o.find(key);
    return it == o.end() ? nullptr : &*it;
}

const json& need(const json& o, const char* key, const std::string& path) {
    const json* j = find(o, key);
    if (!j) fail(path + "." + key, "missing required key");
    return *j;
}

double as_num(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

std::string as_str(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) fail(path, "expected a boolean");
    return j.get<bool>();
}

double opt_num(const json& o, const char* key, const std::string& path, double def) {
    const json* j = find(o, key);
    return j ? as_num(*j, path + "." + key) : def;
}

int opt_int(const json& o, const char* key, const std::string& path, int def) {
    const json* j = find(o, key);
    return j ? as_int(*j, path + "." + key) : def;
}

bool opt_bool(const json& o, const char* key, const std::string& path, bool def) {
    const json* j = find(o, key);
    return j ? as_bool(*j, path + "." + key) : def;
}

std::vector<double> num_array(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(as_num(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::string> str_array(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of strings");
    std::vector<std::string> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(as_str(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

void check_keys(const json& o, const std::string& path, bool lenient,
                std::initializer_list<const char*> allowed) {
    if (!o.is_object()) fail(path, "expected an object");
    if (lenient) return;
    for (auto it = o.begin(); it != o.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) fail(path + "." + it.key(), "unknown key");
    }
}

[[noreturn]] void inconsistent(const std::string& what) { throw ConsistencyError(what); }

void require(bool cond, const std::string& what) {
    if (!cond) inconsistent(what);
}

EquipmentOption load_option(const json& j, const std::string& path, bool lenient) {
    check_keys(j, path, lenient,
               {"id", "time_cost", "energy_cost", "output", "input", "min_uptime",
                "max_daily_uses"});
    EquipmentOption o;
    o.id = as_str(need(j, "id", path), path + ".id");
    o.time_cost = as_num(need(j, "time_cost", path), path + ".time_cost");
    o.energy_cost = as_num(need(j, "energy_cost", path), path + ".energy_cost");
    o.output_qty = as_num(need(j, "output", path), path + ".output");
    o.input_qty = as_num(need(j, "input", path), path + ".input");
    o.min_uptime = opt_int(j, "min_uptime", path, 1);
    o.max_daily_uses = opt_int(j, "max_daily_uses", path, 1 << 20);
    require(o.time_cost >= 0 && o.energy_cost >= 0 && o.output_qty >= 0 && o.input_qty >= 0,
            "option '" + o.id + "': costs and quantities must be nonnegative");
    require(o.min_uptime >= 1, "option '" + o.id + "': min_uptime must be at least 1");
    require(o.max_daily_uses >= 0, "option '" + o.id + "': max_daily_uses must be nonnegative");
    return o;
}

Workshop load_workshop(const json& j, const std::string& path, bool lenient) {
    check_keys(j, path, lenient, {"id", "location", "upstream", "downstream", "options"});
    Workshop w;
    w.id = as_str(need(j, "id", path), path + ".id");
    if (const json* loc = find(j, "location")) {
        auto xy = num_array(*loc, path + ".location");
        if (xy.size() != 2) fail(path + ".location", "expected [x, y]");
        w.location_x = xy[0];
        w.location_y = xy[1];
    }
    w.upstream = str_array(need(j, "upstream", path), path + ".upstream");
    w.downstream = str_array(need(j, "downstream", path), path + ".downstream");
    const json& ops = need(j, "options", path);
    if (!ops.is_array()) fail(path + ".options", "expected an array");
    for (std::size_t i = 0; i < ops.size(); ++i)
        w.options.push_back(
            load_option(ops[i], path + ".options[" + std::to_string(i) + "]", lenient));
    require(!w.options.empty(), "workshop '" + w.id + "' has no equipment options");
    std::set<std::string> ids;
    for (const auto& o : w.options)
        require(ids.insert(o.id).second,
                "workshop '" + w.id + "' has duplicate option id '" + o.id + "'");
    return w;
}

Buffer load_buffer(const json& j, const std::string& path, bool lenient) {
    check_keys(j, path, lenient,
               {"id", "initial", "batch", "transport_time", "byproduct_outlet", "main_outlet"});
    Buffer b;
    b.id = as_str(need(j, "id", path), path + ".id");
    b.initial_stock = opt_num(j, "initial", path, 0.0);
    b.transport_batch = opt_num(j, "batch", path, 1.0);
    b.transport_time = opt_num(j, "transport_time", path, 0.0);
    b.is_byproduct_outlet = opt_bool(j, "byproduct_outlet", path, false);
    b.is_main_outlet = opt_bool(j, "main_outlet", path, false);
    require(b.initial_stock >= 0, "buffer '" + b.id + "': initial stock must be nonnegative");
    require(b.transport_batch > 0, "buffer '" + b.id + "': batch must be positive");
    require(b.transport_time >= 0,
            "buffer '" + b.id + "': transport_time must be nonnegative");
    require(!(b.is_byproduct_outlet && b.is_main_outlet),
            "buffer '" + b.id + "' cannot be both a byproduct and a main outlet");
    return b;
}

EnergySystem load_energy(const json& j, const std::string& path, bool lenient) {
    check_keys(j, path, lenient,
               {"bess_capacity", "bess_initial", "discharge_eff", "charge_eff", "ramp_lo",
                "ramp_hi", "rtp", "der_output", "degr_coeff", "sale_price_main",
                "sale_price_by", "usage_rate"});
    EnergySystem e;
    e.bess_capacity = as_num(need(j, "bess_capacity", path), path + ".bess_capacity");
    e.bess_initial = as_num(need(j, "bess_initial", path), path + ".bess_initial");
    e.discharge_eff = as_num(need(j, "discharge_eff", path), path + ".discharge_eff");
    e.charge_eff = as_num(need(j, "charge_eff", path), path + ".charge_eff");
    e.ramp_lo = opt_num(j, "ramp_lo", path, 0.0);
    e.ramp_hi = opt_num(j, "ramp_hi", path, opt::kInf);
    e.rtp = num_array(need(j, "rtp", path), path + ".rtp");
    if (const json* d = find(j, "der_output")) e.der_output = num_array(*d, path + ".der_output");
    e.degr_coeff = opt_num(j, "degr_coeff", path, 0.0);
    e.sale_price_main = opt_num(j, "sale_price_main", path, 0.0);
    e.sale_price_by = opt_num(j, "sale_price_by", path, 0.0);
    e.usage_rate = opt_num(j, "usage_rate", path, 1.0);
    require(e.bess_capacity >= 0, "bess_capacity must be nonnegative");
    require(e.bess_initial >= 0 && e.bess_initial <= e.bess_capacity,
            "bess_initial must lie in [0, bess_capacity]");
    require(e.discharge_eff > 0 && e.discharge_eff <= 1, "discharge_eff must be in (0, 1]");
    require(e.charge_eff > 0 && e.charge_eff <= 1, "charge_eff must be in (0, 1]");
    require(e.ramp_lo >= 0 && e.ramp_lo <= e.ramp_hi, "need 0 <= ramp_lo <= ramp_hi");
    require(e.degr_coeff >= 0, "degr_coeff must be nonnegative");
    require(e.sale_price_main >= 0 && e.sale_price_by >= 0, "sale prices must be nonnegative");
    require(e.usage_rate >= 0, "usage_rate must be nonnegative");
    for (std::size_t h = 0; h < e.rtp.size(); ++h)
        require(e.rtp[h] >= 0,
                "rtp entry for hour " + std::to_string(h) + " is negative");
    for (std::size_t h = 0; h < e.der_output.size(); ++h)
        require(e.der_output[h] >= 0,
                "der_output entry for hour " + std::to_string(h) + " is negative");
    return e;
}

}  // namespace

FactoryGraph load_factory(const std::string& json_text, bool lenient) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("document is not valid JSON: ") + e.what());
    }
    check_keys(root, "$", lenient, {"horizon", "workshops", "buffers", "energy"});

    FactoryGraph g;
    g.horizon = as_int(need(root, "horizon", "$"), "$.horizon");
    require(g.horizon >= 1, "horizon must be at least 1");

    const json& ws = need(root, "workshops", "$");
    if (!ws.is_array()) fail("$.workshops", "expected an array");
    for (std::size_t i = 0; i < ws.size(); ++i)
        g.workshops.push_back(
            load_workshop(ws[i], "$.workshops[" + std::to_string(i) + "]", lenient));

    const json& bs = need(root, "buffers", "$");
    if (!bs.is_array()) fail("$.buffers", "expected an array");
    for (std::size_t i = 0; i < bs.size(); ++i)
        g.buffers.push_back(load_buffer(bs[i], "$.buffers[" + std::to_string(i) + "]", lenient));

    g.energy = load_energy(need(root, "energy", "$"), "$.energy", lenient);

    // Cross-reference and uniqueness checks.
    std::set<std::string> wids, bids;
    for (const auto& w : g.workshops)
        require(wids.insert(w.id).second, "duplicate workshop id '" + w.id + "'");
    for (const auto& b : g.buffers)
        require(bids.insert(b.id).second, "duplicate buffer id '" + b.id + "'");
    for (const auto& w : g.workshops) {
        for (const auto& r : w.upstream)
            require(g.buffer_index(r) >= 0,
                    "workshop '" + w.id + "' references unknown upstream buffer '" + r + "'");
        for (const auto& r : w.downstream)
            require(g.buffer_index(r) >= 0,
                    "workshop '" + w.id + "' references unknown downstream buffer '" + r + "'");
    }
    require(static_cast<int>(g.energy.rtp.size()) == g.horizon,
            "rtp has " + std::to_string(g.energy.rtp.size()) + " entries, expected " +
                std::to_string(g.horizon));
    require(g.energy.der_output.empty() ||
                static_cast<int>(g.energy.der_output.size()) == g.horizon,
            "der_output has " + std::to_string(g.energy.der_output.size()) +
                " entries, expected " + std::to_string(g.horizon));
    g.byproduct_outlet_index();  // throws if several buffers are flagged
    int flags = 0;
    for (const auto& b : g.buffers) flags += b.is_main_outlet ? 1 : 0;
    require(flags <= 1, "several buffers are flagged main_outlet");
    return g;
}

std::string save_factory(const FactoryGraph& g) {
    json root;
    root["horizon"] = g.horizon;
    root["workshops"] = json::array();
    for (const auto& w : g.workshops) {
        json jw;
        jw["id"] = w.id;
        jw["location"] = {w.location_x, w.location_y};
        jw["upstream"] = w.upstream;
        jw["downstream"] = w.downstream;
        jw["options"] = json::array();
        for (const auto& o : w.options) {
            json jo;
            jo["id"] = o.id;
            jo["time_cost"] = o.time_cost;
            jo["energy_cost"] = o.energy_cost;
            jo["output"] = o.output_qty;
            jo["input"] = o.input_qty;
            jo["min_uptime"] = o.min_uptime;
            jo["max_daily_uses"] = o.max_daily_uses;
            jw["options"].push_back(jo);
        }
        root["workshops"].push_back(jw);
    }
    root["buffers"] = json::array();
    for (const auto& b : g.buffers) {
        json jb;
        jb["id"] = b.id;
        jb["initial"] = b.initial_stock;
        jb["batch"] = b.transport_batch;
        jb["transport_time"] = b.transport_time;
        jb["byproduct_outlet"] = b.is_byproduct_outlet;
        jb["main_outlet"] = b.is_main_outlet;
        root["buffers"].push_back(jb);
    }
    json je;
    je["bess_capacity"] = g.energy.bess_capacity;
    je["bess_initial"] = g.energy.bess_initial;
    je["discharge_eff"] = g.energy.discharge_eff;
    je["charge_eff"] = g.energy.charge_eff;
    je["ramp_lo"] = g.energy.ramp_lo;
    if (std::isfinite(g.energy.ramp_hi)) je["ramp_hi"] = g.energy.ramp_hi;
    je["rtp"] = g.energy.rtp;
    je["der_output"] = g.energy.der_output;
    je["degr_coeff"] = g.energy.degr_coeff;
    je["sale_price_main"] = g.energy.sale_price_main;
    je["sale_price_by"] = g.energy.sale_price_by;
    je["usage_rate"] = g.energy.usage_rate;
    root["energy"] = je;
    return root.dump(2);
}

}  // namespace plantsched::factory
