#include "exwave/config.hpp"

#include "exwave/error.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "toml.hpp"

namespace exwave {

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

void check_keys(const toml::table& table, const std::string& section, std::initializer_list<const char*> allowed)
{
    std::set<std::string> names(allowed.begin(), allowed.end());
    for (auto&& [key, node] : table) {
        (void)node;
        if (!names.contains(std::string(key.str())))
            fail("unknown key '" + std::string(key.str()) + "' in [" + section + "]");
    }
}

const toml::table* sub(const toml::table& parent, const char* key)
{
    const auto* node = parent.get(key);
    if (!node) return nullptr;
    const auto* table = node->as_table();
    if (!table) fail(std::string("'") + key + "' must be a table");
    return table;
}

double get_double(const toml::table& t, const char* key, double fallback, const std::string& section)
{
    const auto* node = t.get(key);
    if (!node) return fallback;
    if (auto v = node->value<double>()) return *v;
    fail("'" + std::string(key) + "' in [" + section + "] must be a number");
}

double require_double(const toml::table& t, const char* key, const std::string& section)
{
    if (!t.get(key)) fail("missing '" + std::string(key) + "' in [" + section + "]");
    return get_double(t, key, 0.0, section);
}

std::int64_t get_int(const toml::table& t, const char* key, std::int64_t fallback, const std::string& section)
{
    const auto* node = t.get(key);
    if (!node) return fallback;
    if (node->is_integer()) return *node->value<std::int64_t>();
    fail("'" + std::string(key) + "' in [" + section + "] must be an integer");
}

bool get_bool(const toml::table& t, const char* key, bool fallback, const std::string& section)
{
    const auto* node = t.get(key);
    if (!node) return fallback;
    if (auto v = node->value<bool>()) return *v;
    fail("'" + std::string(key) + "' in [" + section + "] must be a boolean");
}

std::string get_string(const toml::table& t, const char* key, const std::string& fallback, const std::string& section)
{
    const auto* node = t.get(key);
    if (!node) return fallback;
    if (auto v = node->value<std::string>()) return *v;
    fail("'" + std::string(key) + "' in [" + section + "] must be a string");
}

std::vector<double> get_list(const toml::table& t, const char* key, const std::vector<double>& fallback,
                             const std::string& section)
{
    const auto* node = t.get(key);
    if (!node) return fallback;
    const auto* arr = node->as_array();
    if (!arr) fail("'" + std::string(key) + "' in [" + section + "] must be an array");
    std::vector<double> out;
    for (const auto& el : *arr) {
        auto v = el.value<double>();
        if (!v) fail("'" + std::string(key) + "' in [" + section + "] must hold numbers");
        out.push_back(*v);
    }
    return out;
}

template <std::size_t N>
std::array<double, N> get_array(const toml::table& t, const char* key, const std::array<double, N>& fallback,
                                const std::string& section, bool required = false)
{
    if (!t.get(key)) {
        if (required) fail("missing '" + std::string(key) + "' in [" + section + "]");
        return fallback;
    }
    const auto list = get_list(t, key, {}, section);
    if (list.size() != N)
        fail("'" + std::string(key) + "' in [" + section + "] must have " + std::to_string(N) + " entries");
    std::array<double, N> out{};
    std::copy(list.begin(), list.end(), out.begin());
    return out;
}

Box parse_box(const toml::table& root, const char* key)
{
    const auto* t = sub(root, key);
    if (!t) fail(std::string("missing [") + key + "]");
    check_keys(*t, key, {"lo", "hi"});
    return {get_array<3>(*t, "lo", {}, key, true), get_array<3>(*t, "hi", {}, key, true)};
}

ObstacleSpec parse_obstacle(const toml::table* t)
{
    if (!t) return NoObstacle{};
    const std::string section = "obstacle";
    const auto type = get_string(*t, "type", "none", section);
    if (type == "none") {
        check_keys(*t, section, {"type"});
        return NoObstacle{};
    }
    if (type == "sphere") {
        check_keys(*t, section, {"type", "center", "radius"});
        return SphereObstacle{get_array<3>(*t, "center", {0, 0, 0}, section), require_double(*t, "radius", section)};
    }
    if (type == "box") {
        check_keys(*t, section, {"type", "lo", "hi"});
        return AxisBoxObstacle{
            Box{get_array<3>(*t, "lo", {}, section, true), get_array<3>(*t, "hi", {}, section, true)}};
    }
    if (type == "radial") {
        check_keys(*t, section, {"type", "center", "n_theta", "n_phi", "radius"});
        RadialObstacle r;
        r.center = get_array<3>(*t, "center", {0, 0, 0}, section);
        r.n_theta = static_cast<int>(get_int(*t, "n_theta", 0, section));
        r.n_phi = static_cast<int>(get_int(*t, "n_phi", 0, section));
        r.radius = get_list(*t, "radius", {}, section);
        if (r.n_theta < 1 || r.n_phi < 1 || r.radius.size() != static_cast<std::size_t>(r.n_theta * r.n_phi))
            fail("radial obstacle table must hold n_theta * n_phi radii");
        return r;
    }
    fail("unknown obstacle type '" + type + "'");
}

PatchRect parse_face(const toml::table& t)
{
    const std::string section = "patch.faces";
    check_keys(t, section, {"face", "lo", "hi"});
    const auto face = get_string(t, "face", "", section);
    if (face.size() != 2 || (face[0] != '+' && face[0] != '-') || face[1] < 'x' || face[1] > 'z')
        fail("patch face must be one of +x, -x, +y, -y, +z, -z");
    PatchRect rect;
    rect.axis = face[1] - 'x';
    rect.side = face[0] == '+' ? 1 : -1;
    rect.full_face = !t.get("lo") && !t.get("hi");
    if (!rect.full_face) {
        rect.lo = get_array<2>(t, "lo", {}, section, true);
        rect.hi = get_array<2>(t, "hi", {}, section, true);
    }
    return rect;
}

std::vector<PatchRect> parse_patch(const toml::table* t)
{
    if (!t) fail("missing [patch]");
    check_keys(*t, "patch", {"faces"});
    const auto* node = t->get("faces");
    const auto* arr = node ? node->as_array() : nullptr;
    if (!arr) fail("[patch] needs a 'faces' array");
    std::vector<PatchRect> out;
    for (const auto& el : *arr) {
        if (const auto* s = el.as_string()) {
            toml::table face;
            face.insert("face", s->get());
            out.push_back(parse_face(face));
        } else if (const auto* ft = el.as_table()) {
            out.push_back(parse_face(*ft));
        } else {
            fail("patch faces must be strings or tables");
        }
    }
    return out;
}

AxialProfile::Kind parse_profile(const std::string& name)
{
    if (name == "bump") return AxialProfile::Kind::Bump;
    if (name == "indicator") return AxialProfile::Kind::Indicator;
    fail("unknown axial profile '" + name + "'");
}

DataSpec parse_data(const toml::table* t, const std::string& section)
{
    DataSpec d;
    if (!t) return d;
    check_keys(*t, section,
               {"kind", "amplitude", "transverse", "center", "sigma", "inner", "outer", "axial", "axial_range",
                "radius", "power", "tilt"});
    const auto kind = get_string(*t, "kind", "none", section);
    d.amplitude = get_double(*t, "amplitude", 1.0, section);
    if (kind == "none") {
        d.kind = DataSpec::Kind::None;
    } else if (kind == "separated") {
        d.kind = DataSpec::Kind::Separated;
        const auto tr = get_string(*t, "transverse", "gaussian", section);
        if (tr == "gaussian")
            d.transverse = DataSpec::Transverse::Gaussian;
        else if (tr == "plateau")
            d.transverse = DataSpec::Transverse::Plateau;
        else if (tr == "constant")
            d.transverse = DataSpec::Transverse::Constant;
        else
            fail("unknown transverse profile '" + tr + "'");
        d.center2 = get_array<2>(*t, "center", {0, 0}, section);
        d.sigma = get_double(*t, "sigma", d.sigma, section);
        d.inner = get_double(*t, "inner", d.inner, section);
        d.outer = get_double(*t, "outer", d.outer, section);
        d.axial.kind = parse_profile(get_string(*t, "axial", "bump", section));
        if (t->get("axial_range")) {
            const auto r = get_array<2>(*t, "axial_range", {}, section);
            d.axial.a = r[0];
            d.axial.b = r[1];
            d.axial_from_q0 = false;
        }
        if (d.sigma <= 0.0 || d.inner < 0.0 || d.outer <= d.inner) fail("invalid transverse profile in [" + section + "]");
    } else if (kind == "radial") {
        d.kind = DataSpec::Kind::Radial;
        d.center = get_array<3>(*t, "center", {0, 0, 0}, section);
        d.radius = require_double(*t, "radius", section);
        d.power = static_cast<int>(get_int(*t, "power", d.power, section));
        d.tilt = get_array<3>(*t, "tilt", {0, 0, 0}, section);
        if (d.radius <= 0.0 || d.power < 1) fail("invalid radial datum in [" + section + "]");
    } else {
        fail("unknown data kind '" + kind + "'");
    }
    return d;
}

DataPair parse_pair(const toml::table* t, const std::string& section)
{
    DataPair p;
    if (!t) return p;
    check_keys(*t, section, {"f", "g"});
    p.f = parse_data(sub(*t, "f"), section + ".f");
    p.g = parse_data(sub(*t, "g"), section + ".g");
    return p;
}

SpeedSpec parse_speed(const toml::table* t, const std::string& section)
{
    SpeedSpec s;
    if (!t) return s;
    check_keys(*t, section, {"kind", "amplitude", "radius", "center", "axial_half", "taper", "rho0"});
    const auto kind = get_string(*t, "kind", "uniform", section);
    if (kind == "uniform")
        s.kind = SpeedSpec::Kind::Uniform;
    else if (kind == "contrast")
        s.kind = SpeedSpec::Kind::Contrast;
    else if (kind == "pocket")
        s.kind = SpeedSpec::Kind::Pocket;
    else
        fail("unknown speed kind '" + kind + "'");
    s.amplitude = get_double(*t, "amplitude", 0.0, section);
    s.radius = get_double(*t, "radius", s.radius, section);
    s.center = get_array<3>(*t, "center", {0, 0, 0}, section);
    s.axial_half = get_double(*t, "axial_half", s.axial_half, section);
    s.taper = get_double(*t, "taper", s.taper, section);
    s.rho0 = get_double(*t, "rho0", s.rho0, section);
    if (s.radius <= 0.0 || s.taper <= 0.0) fail("invalid speed profile in [" + section + "]");
    if (s.kind == SpeedSpec::Kind::Pocket && (s.amplitude < 0.0 || s.amplitude >= 1.0))
        fail("pocket amplitude must lie in [0, 1)");
    if (s.kind == SpeedSpec::Kind::Contrast && s.amplitude <= -1.0) fail("contrast amplitude must exceed -1");
    return s;
}

ExperimentConfig from_table(const toml::table& root)
{
    check_keys(root, "root",
               {"experiment", "grid", "obstacle", "sigma", "q0", "q1", "patch", "sim", "speed", "reference_speed",
                "data", "reference", "recon", "decay"});
    ExperimentConfig c;
    if (const auto* e = sub(root, "experiment")) {
        check_keys(*e, "experiment", {"name", "output_dir"});
        c.name = get_string(*e, "name", c.name, "experiment");
        c.output_dir = get_string(*e, "output_dir", c.output_dir.string(), "experiment");
    }

    const auto* grid = sub(root, "grid");
    if (!grid) fail("missing [grid]");
    check_keys(*grid, "grid", {"h", "margin"});
    c.domain.h = require_double(*grid, "h", "grid");
    c.domain.margin = get_double(*grid, "margin", c.domain.margin, "grid");
    if (!(c.domain.h > 0.0)) fail("grid spacing h must be positive");

    c.domain.obstacle = parse_obstacle(sub(root, "obstacle"));
    c.domain.sigma = parse_box(root, "sigma");
    c.domain.q0 = parse_box(root, "q0");
    c.domain.q1 = parse_box(root, "q1");
    c.domain.patch = parse_patch(sub(root, "patch"));

    if (const auto* s = sub(root, "sim")) {
        const std::string sec = "sim";
        check_keys(*s, sec,
                   {"t_max", "cfl", "dt_factor", "sponge", "sponge_max", "sponge_width", "sponge_power",
                    "enforce_cfl", "workers"});
        c.sim.t_max = get_double(*s, "t_max", c.sim.t_max, sec);
        c.sim.cfl = get_double(*s, "cfl", c.sim.cfl, sec);
        c.sim.dt_factor = get_double(*s, "dt_factor", c.sim.dt_factor, sec);
        c.sim.sponge = get_bool(*s, "sponge", c.sim.sponge, sec);
        c.sim.sponge_max = get_double(*s, "sponge_max", c.sim.sponge_max, sec);
        c.domain.sponge_width = get_double(*s, "sponge_width", c.domain.sponge_width, sec);
        c.sim.sponge_power = static_cast<int>(get_int(*s, "sponge_power", c.sim.sponge_power, sec));
        c.sim.enforce_cfl = get_bool(*s, "enforce_cfl", c.sim.enforce_cfl, sec);
        c.sim.workers = static_cast<int>(get_int(*s, "workers", c.sim.workers, sec));
        if (!(c.sim.t_max > 0.0) || !(c.sim.cfl > 0.0) || !(c.sim.dt_factor > 0.0) || c.sim.workers < 1 ||
            c.sim.sponge_power < 1 || c.sim.sponge_max < 0.0)
            fail("invalid [sim] parameters");
    }

    c.speed = parse_speed(sub(root, "speed"), "speed");
    c.reference_speed = parse_speed(sub(root, "reference_speed"), "reference_speed");
    c.data = parse_pair(sub(root, "data"), "data");
    c.reference = parse_pair(sub(root, "reference"), "reference");

    if (const auto* r = sub(root, "recon")) {
        const std::string sec = "recon";
        check_keys(*r, sec,
                   {"rho_list", "sign", "profile", "noise_eps", "seed", "mode", "half_width", "rho", "threshold",
                    "lambda"});
        c.recon.rho_list = get_list(*r, "rho_list", c.recon.rho_list, sec);
        c.recon.sign = static_cast<int>(get_int(*r, "sign", c.recon.sign, sec));
        c.recon.profile = parse_profile(get_string(*r, "profile", "bump", sec));
        c.recon.noise_eps = get_list(*r, "noise_eps", c.recon.noise_eps, sec);
        const auto seed = get_int(*r, "seed", static_cast<std::int64_t>(c.recon.seed), sec);
        if (seed < 0) fail("seed must be nonnegative");
        c.recon.seed = static_cast<std::uint64_t>(seed);
        const auto mode = get_string(*r, "mode", "full", sec);
        if (mode != "full" && mode != "partial") fail("recon mode must be 'full' or 'partial'");
        c.recon.partial = mode == "partial";
        c.recon.half_width = get_double(*r, "half_width", c.recon.half_width, sec);
        c.recon.rho = get_double(*r, "rho", c.recon.rho, sec);
        c.recon.threshold = get_double(*r, "threshold", c.recon.threshold, sec);
        c.recon.lambda = get_double(*r, "lambda", c.recon.lambda, sec);
        if (c.recon.sign < -1 || c.recon.sign > 1) fail("recon sign must be -1, 0 or 1");
        if (c.recon.rho_list.empty() || c.recon.noise_eps.empty()) fail("rho_list and noise_eps must be nonempty");
        for (double rho : c.recon.rho_list)
            if (!(rho > 0.0)) fail("rho_list entries must be positive");
        for (double eps : c.recon.noise_eps)
            if (!(eps >= 0.0)) fail("noise_eps entries must be nonnegative");
        if (!(c.recon.half_width > 0.0)) fail("half_width must be positive");
    }

    if (const auto* d = sub(root, "decay")) {
        const std::string sec = "decay";
        check_keys(*d, sec, {"control", "fit_begin", "fit_end", "span"});
        c.decay.control = get_bool(*d, "control", c.decay.control, sec);
        if (d->get("fit_begin")) c.decay.fit_begin = get_double(*d, "fit_begin", 0.0, sec);
        if (d->get("fit_end")) c.decay.fit_end = get_double(*d, "fit_end", 0.0, sec);
        c.decay.span = get_double(*d, "span", c.decay.span, sec);
        if (!(c.decay.span > 0.0)) fail("decay span must be positive");
    }
    return c;
}

nlohmann::json box_json(const Box& b) { return {{"lo", b.lo}, {"hi", b.hi}}; }

const char* profile_name(AxialProfile::Kind k) { return k == AxialProfile::Kind::Bump ? "bump" : "indicator"; }

nlohmann::json data_json(const DataSpec& d)
{
    nlohmann::json j;
    switch (d.kind) {
    case DataSpec::Kind::None:
        j["kind"] = "none";
        return j;
    case DataSpec::Kind::Separated: {
        j["kind"] = "separated";
        j["amplitude"] = d.amplitude;
        const char* names[] = {"gaussian", "plateau", "constant"};
        j["transverse"] = names[static_cast<int>(d.transverse)];
        j["center"] = d.center2;
        j["sigma"] = d.sigma;
        j["inner"] = d.inner;
        j["outer"] = d.outer;
        j["axial"] = profile_name(d.axial.kind);
        if (d.axial_from_q0)
            j["axial_range"] = "q0";
        else
            j["axial_range"] = {d.axial.a, d.axial.b};
        return j;
    }
    case DataSpec::Kind::Radial:
        j["kind"] = "radial";
        j["amplitude"] = d.amplitude;
        j["center"] = d.center;
        j["radius"] = d.radius;
        j["power"] = d.power;
        j["tilt"] = d.tilt;
        return j;
    }
    return j;
}

nlohmann::json speed_json(const SpeedSpec& s)
{
    const char* names[] = {"uniform", "contrast", "pocket"};
    return {{"kind", names[static_cast<int>(s.kind)]}, {"amplitude", s.amplitude}, {"radius", s.radius},
            {"center", s.center}, {"axial_half", s.axial_half}, {"taper", s.taper}, {"rho0", s.rho0}};
}

nlohmann::json obstacle_json(const ObstacleSpec& o)
{
    if (const auto* s = std::get_if<SphereObstacle>(&o))
        return {{"type", "sphere"}, {"center", s->center}, {"radius", s->radius}};
    if (const auto* b = std::get_if<AxisBoxObstacle>(&o))
        return {{"type", "box"}, {"lo", b->box.lo}, {"hi", b->box.hi}};
    if (const auto* r = std::get_if<RadialObstacle>(&o))
        return {{"type", "radial"}, {"center", r->center}, {"n_theta", r->n_theta}, {"n_phi", r->n_phi},
                {"radius", r->radius}};
    return {{"type", "none"}};
}

double pow_int(double x, int p)
{
    double r = 1.0;
    for (int i = 0; i < p; ++i) r *= x;
    return r;
}

double transverse_value(const DataSpec& d, double x, double y)
{
    const double dx = x - d.center2[0];
    const double dy = y - d.center2[1];
    switch (d.transverse) {
    case DataSpec::Transverse::Gaussian:
        return d.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * d.sigma * d.sigma));
    case DataSpec::Transverse::Plateau:
        return d.amplitude * smooth_cutoff(std::max(std::abs(dx), std::abs(dy)), d.inner, d.outer);
    case DataSpec::Transverse::Constant:
        return d.amplitude;
    }
    return 0.0;
}

}  // namespace

double smooth_cutoff(double r, double a, double b)
{
    if (r <= a) return 1.0;
    if (r >= b) return 0.0;
    const double s = (r - a) / (b - a);
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

double SpeedSpec::c0() const
{
    switch (kind) {
    case Kind::Uniform:
        return 1.0;
    case Kind::Contrast:
        return std::min(1.0, 1.0 + amplitude);
    case Kind::Pocket:
        return 1.0 - amplitude;
    }
    return 1.0;
}

double SpeedSpec::c1() const
{
    if (kind == Kind::Contrast) return std::max(1.0, 1.0 + amplitude);
    return 1.0;
}

double SpeedSpec::operator()(const Vec3& x) const
{
    switch (kind) {
    case Kind::Uniform:
        return 1.0;
    case Kind::Contrast: {
        const double dx = x[0] - center[0];
        const double dy = x[1] - center[1];
        const double r2 = (dx * dx + dy * dy) / (radius * radius);
        if (r2 >= 1.0) return 1.0;
        const double axial = smooth_cutoff(std::abs(x[2] - center[2]), axial_half, axial_half + taper);
        return 1.0 + amplitude * pow_int(1.0 - r2, 3) * axial;
    }
    case Kind::Pocket: {
        const Vec3 d = x - center;
        const double r2 = dot(d, d) / (radius * radius);
        if (r2 >= 1.0) return 1.0;
        return 1.0 - amplitude * pow_int(1.0 - r2, 3);
    }
    }
    return 1.0;
}

ExperimentConfig parse_config(const std::string& text)
{
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "TOML syntax error at line " << e.source().begin.line << ": " << e.description();
        fail(msg.str());
    }
    return from_table(root);
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot read config file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

nlohmann::json canonical_json(const ExperimentConfig& c)
{
    nlohmann::json j;
    j["experiment"] = {{"name", c.name}};
    j["grid"] = {{"h", c.domain.h}, {"margin", c.domain.margin}};
    j["obstacle"] = obstacle_json(c.domain.obstacle);
    j["sigma"] = box_json(c.domain.sigma);
    j["q0"] = box_json(c.domain.q0);
    j["q1"] = box_json(c.domain.q1);
    nlohmann::json faces = nlohmann::json::array();
    for (const auto& p : c.domain.patch) {
        nlohmann::json f = {{"face", std::string(1, p.side > 0 ? '+' : '-') + std::string(1, static_cast<char>('x' + p.axis))}};
        if (!p.full_face) {
            f["lo"] = p.lo;
            f["hi"] = p.hi;
        }
        faces.push_back(f);
    }
    j["patch"] = {{"faces", faces}};
    j["sim"] = {{"t_max", c.sim.t_max},
                {"cfl", c.sim.cfl},
                {"dt_factor", c.sim.dt_factor},
                {"sponge", c.sim.sponge},
                {"sponge_max", c.sim.sponge_max},
                {"sponge_width", c.domain.sponge_width},
                {"sponge_power", c.sim.sponge_power},
                {"enforce_cfl", c.sim.enforce_cfl}};
    j["speed"] = speed_json(c.speed);
    j["reference_speed"] = speed_json(c.reference_speed);
    j["data"] = {{"f", data_json(c.data.f)}, {"g", data_json(c.data.g)}};
    j["reference"] = {{"f", data_json(c.reference.f)}, {"g", data_json(c.reference.g)}};
    j["recon"] = {{"rho_list", c.recon.rho_list},
                  {"sign", c.recon.sign},
                  {"profile", profile_name(c.recon.profile)},
                  {"noise_eps", c.recon.noise_eps},
                  {"seed", c.recon.seed},
                  {"mode", c.recon.partial ? "partial" : "full"},
                  {"half_width", c.recon.half_width},
                  {"rho", c.recon.rho},
                  {"threshold", c.recon.threshold},
                  {"lambda", c.recon.lambda}};
    nlohmann::json decay = {{"control", c.decay.control}, {"span", c.decay.span}};
    if (c.decay.fit_begin) decay["fit_begin"] = *c.decay.fit_begin;
    if (c.decay.fit_end) decay["fit_end"] = *c.decay.fit_end;
    j["decay"] = decay;
    return j;
}

std::string fnv1a_hex(const std::string& text)
{
    std::uint64_t hash = 14695981039346656037ULL;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, hash);
    return buf;
}

std::string config_hash(const ExperimentConfig& config) { return fnv1a_hex(canonical_json(config).dump()); }

ScalarField assemble_data(const DataSpec& spec, const DomainSpec& domain)
{
    if (spec.kind == DataSpec::Kind::Separated) return separated_of(spec, domain).assemble(domain);
    ScalarField out(domain.grid, 0.0);
    if (spec.kind == DataSpec::Kind::None) return out;
    const auto& g = domain.grid;
    const double r2max = spec.radius * spec.radius;
    for (std::size_t n = 0; n < g.size(); ++n) {
        if (!domain.in_q0(n)) continue;
        const auto c = g.unravel(n);
        const Vec3 d = g.position(c[0], c[1], c[2]) - spec.center;
        const double r2 = dot(d, d) / r2max;
        if (r2 >= 1.0) continue;
        out[n] = spec.amplitude * (1.0 + dot(spec.tilt, d)) * pow_int(1.0 - r2, spec.power);
    }
    return out;
}

InitialData assemble_pair(const DataPair& pair, const DomainSpec& domain)
{
    InitialData data;
    data.f = assemble_data(pair.f, domain);
    data.g = assemble_data(pair.g, domain);
    return data;
}

SeparatedData separated_of(const DataSpec& spec, const DomainSpec& domain)
{
    if (spec.kind != DataSpec::Kind::Separated) fail("datum is not separated");
    SeparatedData s;
    s.transverse = [spec](double x, double y) { return transverse_value(spec, x, y); };
    s.axial = spec.axial;
    if (spec.axial_from_q0) {
        s.axial.a = domain.q0.lo[2];
        s.axial.b = domain.q0.hi[2];
    }
    return s;
}

SpeedField sample_speed(const SpeedSpec& spec, const GridSpec& grid)
{
    if (spec.kind == SpeedSpec::Kind::Uniform) return SpeedField::uniform(grid);
    return SpeedField::sample(grid, [&spec](const Vec3& x) { return spec(x); }, spec.c0(), spec.c1(), spec.rho0);
}

SimOptions sim_options(const ExperimentConfig& config, double c1)
{
    SimOptions o;
    o.cfl = config.sim.cfl;
    o.dt = config.sim.dt_factor * config.sim.cfl * config.domain.h / (std::sqrt(3.0) * c1);
    o.sponge = config.sim.sponge;
    o.sponge_max = config.sim.sponge_max;
    o.sponge_power = config.sim.sponge_power;
    o.enforce_cfl = config.sim.enforce_cfl;
    o.workers = config.sim.workers;
    return o;
}

}  // namespace exwave
