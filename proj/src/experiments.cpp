#include "exwave/error.hpp"
#include "exwave/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>

namespace exwave {

namespace {

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class FinalFieldRecorder : public Recorder {
public:
    void observe(const Snapshot&) override {}
    void finish(const Snapshot& last) override { field = *last.u; }
    ScalarField field;
};

struct Setup {
    DomainSpec domain;
    SpeedField speed;
    SpeedField reference_speed;
    SimOptions options;
    double c0 = 1.0;
    double c1 = 1.0;
    bool same_speed = true;
};

bool speed_equal(const SpeedSpec& a, const SpeedSpec& b)
{
    if (a.kind != b.kind) return false;
    if (a.kind == SpeedSpec::Kind::Uniform) return true;
    return a.amplitude == b.amplitude && a.radius == b.radius && a.center == b.center &&
           a.axial_half == b.axial_half && a.taper == b.taper;
}

Setup make_setup(const ExperimentConfig& c)
{
    Setup s;
    s.domain = build_domain(c.domain);
    s.speed = sample_speed(c.speed, s.domain.grid);
    s.reference_speed = sample_speed(c.reference_speed, s.domain.grid);
    s.c0 = std::min(c.speed.c0(), c.reference_speed.c0());
    s.c1 = std::max(c.speed.c1(), c.reference_speed.c1());
    s.options = sim_options(c, s.c1);
    s.same_speed = speed_equal(c.speed, c.reference_speed);
    return s;
}

bool is_zero(const DataPair& p) { return p.f.kind == DataSpec::Kind::None && p.g.kind == DataSpec::Kind::None; }

InitialData difference_data(const InitialData& a, const InitialData& b)
{
    InitialData d = a;
    for (std::size_t n = 0; n < d.f.size(); ++n) {
        d.f[n] -= b.f[n];
        d.g[n] -= b.g[n];
    }
    return d;
}

/// Runs u (data, speed) minus u~ (reference, reference speed); a single run when the reference vanishes.
RunSummary run_pair(const ExperimentConfig& c, const Setup& s, std::span<Recorder* const> recorders)
{
    const Simulator sim(s.domain, s.speed, s.options);
    const auto data = assemble_pair(c.data, s.domain);
    if (is_zero(c.reference) && s.same_speed && c.reference_speed.kind == SpeedSpec::Kind::Uniform)
        return sim.run(data, c.sim.t_max, recorders);
    const Simulator ref(s.domain, s.reference_speed, s.options);
    const auto ref_data = assemble_pair(c.reference, s.domain);
    return run_difference(sim, data, ref, ref_data, c.sim.t_max, recorders);
}

nlohmann::json run_json(const RunSummary& r) { return {{"steps", r.steps}, {"t_final", r.t_final}, {"dt", r.dt}}; }

BoundaryMesh full_mesh(const DomainSpec& domain)
{
    auto mesh = staggered_mesh(SurfaceTag::Obstacle, domain);
    mesh.append(staggered_mesh(SurfaceTag::Sigma, domain));
    return mesh;
}

void write_energy(const std::filesystem::path& path, const EnergySeries& e)
{
    std::vector<std::vector<double>> rows;
    rows.reserve(e.times.size());
    for (std::size_t i = 0; i < e.times.size(); ++i) rows.push_back({e.times[i], e.energy[i]});
    write_csv(path, {"t", "E_Q"}, rows);
}

double plane_l2(const PlaneField& p)
{
    double s = 0.0;
    for (double v : p.values) s += v * v;
    return std::sqrt(s) * p.h;
}

ExperimentOutput finish_output(ExperimentOutput out, const std::filesystem::path& dir)
{
    require_finite(out.report);
    write_json(dir / "report.json", out.report);
    write_json(dir / "timing.json", out.timing);
    out.files.push_back(dir / "report.json");
    out.files.push_back(dir / "timing.json");
    return out;
}

// ---------------------------------------------------------------------------
// Reconstruction channels

struct ChannelSpec {
    int order = 0;
    std::string name;
    AxialProfile axial;
    PlaneField truth;
    PlaneField window;
    bool zero_truth = false;
};

std::optional<ChannelSpec> make_channel(int order, const DataSpec& spec, const DataSpec& ref, const ExperimentConfig& c,
                                        const DomainSpec& domain)
{
    const bool a = spec.kind == DataSpec::Kind::Separated;
    const bool b = ref.kind == DataSpec::Kind::Separated;
    if (!a && !b) return std::nullopt;
    if ((spec.kind == DataSpec::Kind::Radial) || (ref.kind == DataSpec::Kind::Radial))
        throw Error(ErrorKind::ConfigError, "reconstruction needs separated data and references");
    ChannelSpec ch;
    ch.order = order;
    ch.name = order == 0 ? "g" : "f";
    std::optional<SeparatedData> sa;
    std::optional<SeparatedData> sb;
    if (a) sa = separated_of(spec, domain);
    if (b) sb = separated_of(ref, domain);
    if (a && b && (sa->axial.a != sb->axial.a || sa->axial.b != sb->axial.b || sa->axial.kind != sb->axial.kind))
        throw Error(ErrorKind::ConfigError, "datum and reference must share the axial profile");
    ch.axial = a ? sa->axial : sb->axial;
    ch.axial.kind = c.recon.profile;
    ch.truth = a ? sa->transverse_samples(domain) : sb->transverse_samples(domain);
    if (!a) std::fill(ch.truth.values.begin(), ch.truth.values.end(), 0.0);
    if (b) {
        const auto r = sb->transverse_samples(domain);
        for (std::size_t i = 0; i < ch.truth.values.size(); ++i) ch.truth.values[i] -= r.values[i];
    }
    ch.window = ch.truth;
    ch.zero_truth = plane_l2(ch.truth) == 0.0;
    return ch;
}

FourierRecovery fourier_of(const MomentTraces& traces, const AxialProfile& axial, const ExperimentConfig& c,
                           double rho_max)
{
    FourierOptions o;
    o.rho_max = rho_max;
    o.half_width = c.recon.half_width;
    o.grid_probes = true;
    o.workers = c.sim.workers;
    if (c.recon.sign != 0) {
        o.sign = c.recon.sign;
        return recover_fourier(traces, axial, o);
    }
    o.sign = 1;
    const auto plus = recover_fourier(traces, axial, o);
    o.sign = -1;
    return average_signs(plus, recover_fourier(traces, axial, o));
}

void write_fourier(const std::filesystem::path& path, const FourierRecovery& f)
{
    std::vector<std::vector<double>> rows;
    rows.reserve(f.values.size());
    for (std::size_t i = 0; i < f.values.size(); ++i)
        rows.push_back({f.eta1[i], f.eta2[i], f.values[i].real(), f.values[i].imag()});
    write_csv(path, {"eta1", "eta2", "re_F", "im_F"}, rows);
}

struct ChannelResult {
    nlohmann::json report;
    std::vector<std::vector<double>> error_rows;
};

/// Error tables of one channel over rho_list and noise levels.
ChannelResult evaluate_channel(const ChannelSpec& ch, const std::function<MomentTraces(int, double)>& traces,
                               const ExperimentConfig& c, ReconstructionMode mode, const std::filesystem::path& out,
                               ExperimentOutput& bundle)
{
    ChannelResult res;
    auto eps_list = c.recon.noise_eps;
    if (mode == ReconstructionMode::SweepRho) eps_list.resize(1);
    double rho_max = *std::max_element(c.recon.rho_list.begin(), c.recon.rho_list.end());
    rho_max = std::max(rho_max, c.recon.rho);
    const PlaneField* truth = ch.zero_truth ? nullptr : &ch.truth;

    const auto clean = fourier_of(traces(ch.order, 0.0), ch.axial, c, rho_max);
    const std::string suffix = ch.order == 0 ? "" : "_f";
    write_fourier(out / ("fourier" + suffix + ".csv"), clean);
    bundle.files.push_back(out / ("fourier" + suffix + ".csv"));

    double clean_best = std::numeric_limits<double>::infinity();
    double clean_rho = c.recon.rho_list.front();
    for (double rho : c.recon.rho_list) {
        const auto r = truncated_inversion(clean, rho, ch.window, truth);
        const double e = truth ? r.rel_error : plane_l2(r.g);
        if (e < clean_best) {
            clean_best = e;
            clean_rho = rho;
        }
    }
    const double rho_used = c.recon.rho > 0.0 ? c.recon.rho : clean_rho;

    nlohmann::json tables = nlohmann::json::array();
    std::vector<double> sorted_eps = eps_list;
    std::sort(sorted_eps.begin(), sorted_eps.end());
    std::vector<std::pair<double, TradeoffSummary>> summaries;
    for (double eps : eps_list) {
        const auto f = eps == 0.0 ? clean : fourier_of(traces(ch.order, eps), ch.axial, c, rho_max);
        nlohmann::json row = {{"eps", eps}};
        if (mode == ReconstructionMode::Single) {
            const auto r = truncated_inversion(f, rho_used, ch.window, truth);
            const double e = truth ? r.rel_error : plane_l2(r.g);
            res.error_rows.push_back({rho_used, eps, e});
            row["rho"] = rho_used;
            row["error"] = e;
            row["max_imag"] = r.max_imag;
        } else {
            std::vector<double> errs;
            double max_imag = 0.0;
            for (double rho : c.recon.rho_list) {
                const auto r = truncated_inversion(f, rho, ch.window, truth);
                const double e = truth ? r.rel_error : plane_l2(r.g);
                errs.push_back(e);
                max_imag = std::max(max_imag, r.max_imag);
                res.error_rows.push_back({rho, eps, e});
            }
            const auto s = summarize_tradeoff(c.recon.rho_list, errs);
            summaries.emplace_back(eps, s);
            row["errors"] = errs;
            row["rho_star"] = s.rho_star;
            row["min_error"] = s.min_error;
            row["u_shaped"] = s.decreasing_then_increasing && s.interior_minimum;
            row["interior_minimum"] = s.interior_minimum;
            row["max_imag"] = max_imag;
        }
        tables.push_back(row);
    }

    nlohmann::json rep = {{"order", ch.order},
                          {"name", ch.name},
                          {"zero_truth", ch.zero_truth},
                          {"error_measure", ch.zero_truth ? "absolute_l2" : "relative_l2"},
                          {"rho_list", c.recon.rho_list},
                          {"rho_used", rho_used},
                          {"noiseless_rho_star", clean_rho},
                          {"noiseless_min_error", clean_best},
                          {"truth_l2", plane_l2(ch.truth)},
                          {"table", tables}};
    if (summaries.size() > 1) {
        std::sort(summaries.begin(), summaries.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        bool rho_ok = true;
        bool err_ok = true;
        for (std::size_t i = 1; i < summaries.size(); ++i) {
            rho_ok = rho_ok && summaries[i].second.rho_star <= summaries[i - 1].second.rho_star;
            err_ok = err_ok && summaries[i].second.min_error >= summaries[i - 1].second.min_error;
        }
        rep["rho_star_nonincreasing_in_eps"] = rho_ok;
        rep["min_error_nondecreasing_in_eps"] = err_ok;
    }

    const auto best = truncated_inversion(clean, rho_used, ch.window, truth);
    write_plane(out / ("recon" + suffix + ".f64"), best.g);
    bundle.files.push_back(out / ("recon" + suffix + ".f64"));
    res.report = rep;
    return res;
}

}  // namespace

// ---------------------------------------------------------------------------
// Output helpers

void require_finite(const nlohmann::json& j, const std::string& where)
{
    if (j.is_number_float() && !std::isfinite(j.get<double>()))
        throw Error(ErrorKind::NumericalBlowup, "non-finite value in " + where);
    if (j.is_object())
        for (auto it = j.begin(); it != j.end(); ++it) require_finite(it.value(), where + "." + it.key());
    if (j.is_array())
        for (std::size_t i = 0; i < j.size(); ++i) require_finite(j[i], where + "[" + std::to_string(i) + "]");
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::ConfigError, "cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt17(row[i]);
        out << '\n';
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::ConfigError, "cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

void write_plane(const std::filesystem::path& path, const PlaneField& plane)
{
    GridSpec g;
    g.origin = {plane.x0, plane.y0, 0.0};
    g.h = plane.h;
    g.dims = {plane.nx, plane.ny, 1};
    ScalarField f(g);
    for (std::size_t i = 0; i < plane.values.size(); ++i) f[i] = plane.values[i];
    write_field(path, f);
}

nlohmann::json report_header(const ExperimentConfig& config, const DomainSpec& domain, const std::string& experiment)
{
    const auto k = stability_constants(domain);
    return {{"experiment", experiment},
            {"name", config.name},
            {"config_hash", config_hash(config)},
            {"config", canonical_json(config)},
            {"constants", {{"tau", k.tau}, {"gamma", k.gamma}, {"sigma", k.sigma_c}, {"alpha", k.alpha}}},
            {"grid",
             {{"h", domain.grid.h}, {"dims", domain.grid.dims}, {"origin", domain.grid.origin}, {"nodes", domain.grid.size()}}}};
}

TradeoffSummary summarize_tradeoff(std::span<const double> rho, std::span<const double> error, double slack)
{
    TradeoffSummary s;
    if (error.empty()) return s;
    const auto it = std::min_element(error.begin(), error.end());
    const auto i_star = static_cast<std::size_t>(it - error.begin());
    s.rho_star = rho[i_star];
    s.min_error = *it;
    s.interior_minimum = i_star > 0 && i_star + 1 < error.size();
    bool ok = true;
    for (std::size_t i = 0; i + 1 <= i_star && i + 1 < error.size(); ++i)
        ok = ok && error[i + 1] <= error[i] * (1.0 + slack);
    for (std::size_t i = i_star; i + 1 < error.size(); ++i) ok = ok && error[i + 1] >= error[i] * (1.0 - slack);
    s.decreasing_then_increasing = ok;
    return s;
}

// ---------------------------------------------------------------------------
// Experiments

nlohmann::json check_domain(const ExperimentConfig& config)
{
    const auto domain = build_domain(config.domain);
    auto report = report_header(config, domain, "check-domain");
    std::array<std::size_t, 6> counts{};
    for (auto r : domain.region) ++counts[static_cast<std::size_t>(r)];
    report["valid"] = true;
    report["regions"] = {{"obstacle", counts[0]}, {"annulus", counts[1]}, {"shell", counts[2]},
                         {"q0", counts[3]},       {"exterior", counts[4]}, {"sponge", counts[5]}};
    report["annulus_components"] = annulus_components(domain);
    if (has_boundary(domain.obstacle)) {
        const auto star = star_shaped_check(domain.obstacle);
        report["star_shaped"] = {{"star_shaped", star.star_shaped}, {"min_x_dot_nu", star.min_x_dot_nu}};
        report["obstacle_area"] = obstacle_mesh(domain.obstacle, domain.grid.h).area();
    }
    report["sigma_area"] = boundary_mesh(SurfaceTag::Sigma, domain).area();
    report["patch_area"] = boundary_mesh(SurfaceTag::Patch, domain).area();
    report["patch_links"] = staggered_mesh(SurfaceTag::Patch, domain).size();
    report["clearing_time"] = clearing_time(domain, std::min(config.speed.c0(), config.reference_speed.c0()));
    require_finite(report);
    return report;
}

ExperimentOutput experiment_simulate(const ExperimentConfig& config, const std::filesystem::path& out)
{
    ExperimentOutput o;
    Stopwatch clock;
    const auto s = make_setup(config);
    EnergyRecorder energy(s.domain);
    NormRecorder norms(s.domain);
    FinalFieldRecorder last;
    Recorder* recs[] = {&energy, &norms, &last};
    const auto run = run_pair(config, s, recs);
    o.timing["simulation_seconds"] = clock.seconds();

    write_energy(out / "energy.csv", energy.series());
    write_field(out / "u_final.f64", last.field);
    const auto n = norms.norms().to_json();
    write_json(out / "norms.json", n);
    o.files = {out / "energy.csv", out / "u_final.f64", out / "norms.json"};

    const auto& e = energy.series().energy;
    const double peak = e.empty() ? 0.0 : *std::max_element(e.begin(), e.end());
    o.report = report_header(config, s.domain, "simulate");
    o.report["run"] = run_json(run);
    o.report["energy"] = {{"initial", e.empty() ? 0.0 : e.front()}, {"peak", peak}, {"final", e.empty() ? 0.0 : e.back()}};
    const auto data = difference_data(assemble_pair(config.data, s.domain), assemble_pair(config.reference, s.domain));
    o.report["theta"] = data_norm(data);
    o.report["norms"] = n;
    return finish_output(std::move(o), out);
}

ExperimentOutput experiment_moments(const ExperimentConfig& config, const std::filesystem::path& out)
{
    ExperimentOutput o;
    Stopwatch clock;
    const auto s = make_setup(config);
    const std::vector<int> orders{0, 1, 2, 3};
    MomentAccumulator acc(s.domain, orders);
    const auto mesh = full_mesh(s.domain);
    TraceMomentRecorder traces(mesh, orders);
    Recorder* recs[] = {&acc, &traces};
    const auto run = run_pair(config, s, recs);
    o.timing["simulation_seconds"] = clock.seconds();

    const auto& m = acc.data();
    o.report = report_header(config, s.domain, "moments");
    o.report["run"] = run_json(run);
    nlohmann::json per = nlohmann::json::array();
    for (int k : orders) {
        const auto name = "v" + std::to_string(k);
        write_field(out / (name + ".f64"), m.field(k));
        o.files.push_back(out / (name + ".f64"));
        const auto mt = traces.traces(k);
        const auto tm = sample_traces(m.field(k), mesh, k);
        double dv = 0.0, nv = 0.0, df = 0.0, nf = 0.0;
        for (std::size_t p = 0; p < mesh.size(); ++p) {
            dv += (mt.value[p] - tm.value[p]) * (mt.value[p] - tm.value[p]);
            nv += tm.value[p] * tm.value[p];
            df += (mt.dnu[p] - tm.dnu[p]) * (mt.dnu[p] - tm.dnu[p]);
            nf += tm.dnu[p] * tm.dnu[p];
        }
        const auto path = out / ("traces_" + std::to_string(k) + ".csv");
        std::ofstream csv(path, std::ios::binary);
        if (!csv) throw Error(ErrorKind::ConfigError, "cannot open " + path.string() + " for writing");
        csv << "index,x,y,z,tag,v_" << k << ",dv_" << k << '\n';
        for (std::size_t p = 0; p < mesh.size(); ++p)
            csv << p << ',' << fmt17(mesh.points[p][0]) << ',' << fmt17(mesh.points[p][1]) << ','
                << fmt17(mesh.points[p][2]) << ',' << to_string(mesh.tags[p]) << ',' << fmt17(mt.value[p]) << ','
                << fmt17(mt.dnu[p]) << '\n';
        o.files.push_back(path);
        per.push_back({{"order", k},
                       {"tail_estimate", m.tail_of(k)},
                       {"trace_consistency_value", nv > 0.0 ? std::sqrt(dv / nv) : std::sqrt(dv)},
                       {"trace_consistency_flux", nf > 0.0 ? std::sqrt(df / nf) : std::sqrt(df)}});
    }
    o.report["orders"] = per;

    if (s.same_speed) {
        const auto data = difference_data(assemble_pair(config.data, s.domain), assemble_pair(config.reference, s.domain));
        nlohmann::json res = nlohmann::json::array();
        for (auto region : {ResidualRegion::Q, ResidualRegion::Q0})
            for (auto stencil : {ResidualStencil::SecondOrder, ResidualStencil::FourthOrder}) {
                try {
                    const auto r = poisson_residual(m, data, s.speed, s.domain, region, stencil);
                    res.push_back({{"region", region == ResidualRegion::Q ? "Q" : "Q0"},
                                   {"stencil", stencil == ResidualStencil::SecondOrder ? "second_order" : "fourth_order"},
                                   {"nodes", r.nodes},
                                   {"residual", r.residual},
                                   {"absolute", r.absolute}});
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::EmptyMask) throw;
                }
            }
        o.report["poisson_residuals"] = res;
    }
    o.timing["total_seconds"] = clock.seconds();
    return finish_output(std::move(o), out);
}

ExperimentOutput experiment_decay(const ExperimentConfig& config, const std::filesystem::path& out)
{
    ExperimentOutput o;
    Stopwatch clock;
    const auto s = make_setup(config);
    const Simulator sim(s.domain, s.speed, s.options);
    const auto data = assemble_pair(config.data, s.domain);
    EnergyRecorder energy(s.domain);
    Recorder* recs[] = {&energy};
    const auto run = sim.run(data, config.sim.t_max, recs);
    o.timing["simulation_seconds"] = clock.seconds();
    write_energy(out / "energy.csv", energy.series());
    o.files.push_back(out / "energy.csv");

    const double t_clear = clearing_time(s.domain, s.c0);
    FitWindow window;
    window.t_begin = config.decay.fit_begin.value_or(t_clear);
    window.t_end = config.decay.fit_end.value_or(std::min(window.t_begin + config.decay.span, run.t_final));
    const auto fit = fit_decay(energy.series(), window);
    const double theta = data_norm(data);

    o.report = report_header(config, s.domain, "decay");
    o.report["run"] = run_json(run);
    o.report["clearing_time"] = t_clear;
    o.report["theta"] = theta;
    o.report["fit"] = {{"delta", fit.delta},
                       {"kappa", fit.kappa},
                       {"kappa_over_theta_sq", theta > 0.0 ? fit.kappa / (theta * theta) : 0.0},
                       {"r_squared", fit.r_squared},
                       {"samples", fit.samples},
                       {"window", {fit.window.t_begin, fit.window.t_end}}};
    o.report["decaying"] = fit.delta > 0.0 && fit.r_squared >= 0.9;
    if (has_boundary(s.domain.obstacle)) {
        const auto star = star_shaped_check(s.domain.obstacle);
        o.report["star_shaped"] = star.star_shaped;
    }

    if (config.decay.control && has_boundary(config.domain.obstacle)) {
        auto control = config;
        control.domain.obstacle = NoObstacle{};
        const auto cs = make_setup(control);
        const Simulator csim(cs.domain, cs.speed, cs.options);
        EnergyRecorder ce(cs.domain);
        Recorder* crecs[] = {&ce};
        csim.run(assemble_pair(control.data, cs.domain), control.sim.t_max, crecs);
        write_energy(out / "energy_control.csv", ce.series());
        o.files.push_back(out / "energy_control.csv");
        const auto& e = ce.series();
        const double peak = *std::max_element(e.energy.begin(), e.energy.end());
        const double t_after = (1.0 + kGroupLag) * t_clear;
        double late = 0.0;
        for (std::size_t i = 0; i < e.times.size(); ++i)
            if (e.times[i] >= t_after) late = std::max(late, e.energy[i]);
        o.report["control"] = {{"peak_energy", peak},
                               {"checked_after", t_after},
                               {"max_energy_after_clearing", late},
                               {"ratio", peak > 0.0 ? late / peak : 0.0},
                               {"cleared", late <= 1e-3 * peak}};
    }
    o.timing["total_seconds"] = clock.seconds();
    return finish_output(std::move(o), out);
}

ExperimentOutput experiment_reconstruct(const ExperimentConfig& config, const std::filesystem::path& out,
                                        ReconstructionMode mode)
{
    ExperimentOutput o;
    Stopwatch clock;
    const auto s = make_setup(config);
    std::vector<ChannelSpec> channels;
    if (auto g = make_channel(0, config.data.g, config.reference.g, config, s.domain)) channels.push_back(*g);
    if (mode == ReconstructionMode::EndToEnd || channels.empty())
        if (auto f = make_channel(1, config.data.f, config.reference.f, config, s.domain)) channels.push_back(*f);
    if (channels.empty()) throw Error(ErrorKind::ConfigError, "reconstruction needs a separated g or f difference");

    const auto mesh = full_mesh(s.domain);
    TraceMomentRecorder full(mesh, {0, 1}, config.recon.seed);
    std::optional<TraceMomentRecorder> patch;
    if (config.recon.partial) patch.emplace(staggered_mesh(SurfaceTag::Patch, s.domain), std::vector<int>{0, 1}, config.recon.seed);
    NormRecorder norms(s.domain);
    std::vector<Recorder*> recs{&full, &norms};
    if (patch) recs.push_back(&*patch);
    const auto run = run_pair(config, s, recs);
    o.timing["simulation_seconds"] = clock.seconds();

    nlohmann::json cauchy = nlohmann::json::array();
    std::function<MomentTraces(int, double)> traces = [&](int k, double eps) {
        if (!patch) return full.traces(k, eps);
        CauchyOptions co;
        co.lambda = config.recon.lambda;
        auto ext = cauchy_extend(patch->traces(k, eps), mesh, s.domain, co);
        cauchy.push_back({{"order", k}, {"eps", eps}, {"lambda", ext.lambda}, {"condition", ext.condition},
                          {"residual", ext.residual}});
        return ext.completed;
    };

    const char* names[] = {"reconstruct", "sweep-rho", "sweep-noise", "end-to-end"};
    o.report = report_header(config, s.domain, names[static_cast<int>(mode)]);
    o.report["run"] = run_json(run);
    o.report["mode"] = config.recon.partial ? "partial" : "full";
    o.report["trace_max"] = {{"value", full.max_abs_value()}, {"flux", full.max_abs_flux()}};
    const auto data = difference_data(assemble_pair(config.data, s.domain), assemble_pair(config.reference, s.domain));
    const double theta = data_norm(data);
    o.report["theta"] = theta;

    nlohmann::json chans = nlohmann::json::array();
    for (const auto& ch : channels) {
        auto r = evaluate_channel(ch, traces, config, mode, out, o);
        const std::string file = ch.order == 0 ? "errors.csv" : "errors_f.csv";
        write_csv(out / file, {"rho", "eps", "rel_l2"}, r.error_rows);
        o.files.push_back(out / file);
        if (theta > 0.0) r.report["noiseless_min_error_over_theta"] = r.report["noiseless_min_error"].get<double>() / theta;
        chans.push_back(r.report);
    }
    o.report["channels"] = chans;
    if (!cauchy.empty()) o.report["cauchy"] = cauchy;

    const auto n = norms.norms().to_json();
    write_json(out / "norms.json", n);
    o.files.push_back(out / "norms.json");
    o.report["norms"] = n;
    o.timing["total_seconds"] = clock.seconds();
    return finish_output(std::move(o), out);
}

ExperimentOutput experiment_end_to_end(const ExperimentConfig& config, const std::filesystem::path& out)
{
    return experiment_reconstruct(config, out, ReconstructionMode::EndToEnd);
}

ExperimentOutput experiment_speed(const ExperimentConfig& config, const std::filesystem::path& out)
{
    ExperimentOutput o;
    Stopwatch clock;
    if (config.data.g.kind != DataSpec::Kind::Separated && config.data.f.kind != DataSpec::Kind::Separated)
        throw Error(ErrorKind::ConfigError, "speed contrast needs a separated g or f");
    const auto s = make_setup(config);
    const Simulator sim(s.domain, s.speed, s.options);
    const Simulator ref(s.domain, s.reference_speed, s.options);
    const auto data = assemble_pair(config.data, s.domain);

    const auto mesh = full_mesh(s.domain);
    TraceMomentRecorder traces(mesh, {0, 1});
    NormRecorder norms(s.domain);
    Recorder* recs[] = {&traces, &norms};
    const auto run = run_difference(sim, data, ref, data, config.sim.t_max, recs);
    NormRecorder floor(s.domain);
    Recorder* frecs[] = {&floor};
    run_difference(ref, data, ref, data, config.sim.t_max, frecs);
    o.timing["simulation_seconds"] = clock.seconds();

    const auto n = norms.norms();
    const auto nf = floor.norms();
    write_json(out / "norms.json", {{"difference", n.to_json()}, {"identical_speed_control", nf.to_json()}});
    o.files.push_back(out / "norms.json");

    o.report = report_header(config, s.domain, "speed-contrast");
    o.report["run"] = run_json(run);
    o.report["norms"] = n.to_json();
    o.report["control_norms"] = nf.to_json();
    o.report["distinguishable"] = n.n > 10.0 * nf.n;

    const double z_mid = 0.5 * (s.domain.q0.lo[2] + s.domain.q0.hi[2]);
    const std::function<double(double, double)> c_ref = [&](double x, double y) { return config.reference_speed({x, y, z_mid}); };
    const std::function<double(double, double)> c_true = [&](double x, double y) { return config.speed({x, y, z_mid}); };
    const double rho = config.recon.rho > 0.0 ? config.recon.rho
                                              : *std::max_element(config.recon.rho_list.begin(), config.recon.rho_list.end());

    std::vector<ContrastChannel> channels;
    std::vector<std::vector<double>> rows;
    nlohmann::json chans = nlohmann::json::array();
    for (int k : {0, 1}) {
        const auto& spec = k == 0 ? config.data.g : config.data.f;
        if (spec.kind != DataSpec::Kind::Separated) continue;
        const auto sep = separated_of(spec, s.domain);
        auto axial = sep.axial;
        axial.kind = config.recon.profile;
        const auto reference = sep.transverse_samples(s.domain);
        const auto f = fourier_of(traces.traces(k), axial, config, rho);
        auto q_truth = reference;
        for (int j = 0; j < q_truth.ny; ++j)
            for (int i = 0; i < q_truth.nx; ++i) {
                const double c = c_true(q_truth.x(i), q_truth.y(j));
                const double cr = c_ref(q_truth.x(i), q_truth.y(j));
                q_truth.at(i, j) = reference.at(i, j) * (1.0 / (c * c) - 1.0 / (cr * cr));
            }
        const auto r = truncated_inversion(f, rho, reference, &q_truth);
        ContrastChannel ch{r.g, reference, std::vector<bool>(reference.values.size())};
        for (std::size_t i = 0; i < reference.values.size(); ++i)
            ch.mask[i] = std::abs(reference.values[i]) >= config.recon.threshold;
        channels.push_back(ch);
        chans.push_back({{"order", k}, {"q_rel_error", r.rel_error}, {"max_imag", r.max_imag}});
    }
    o.report["channels"] = chans;
    o.report["rho"] = rho;
    o.report["threshold"] = config.recon.threshold;

    try {
        const auto sc = recover_speed_contrast(channels, c_ref, config.recon.threshold, &c_true);
        write_plane(out / "contrast_c.f64", sc.c_diff);
        write_plane(out / "contrast_inv_sq.f64", sc.inv_sq_diff);
        o.files.push_back(out / "contrast_c.f64");
        o.files.push_back(out / "contrast_inv_sq.f64");
        std::size_t mask_nodes = 0;
        for (bool b : sc.mask) mask_nodes += b ? 1 : 0;
        o.report["identifiable"] = true;
        o.report["contrast"] = {{"rel_error_c", sc.rel_error_c},
                                {"rel_error_inv_sq", sc.rel_error_inv_sq},
                                {"norm_c", sc.norm_c},
                                {"norm_inv_sq", sc.norm_inv_sq},
                                {"mask_nodes", mask_nodes}};
        rows.push_back({rho, 0.0, sc.rel_error_c});
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyMask) throw;
        o.report["identifiable"] = false;
        o.report["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
        finish_output(std::move(o), out);
        throw;
    }
    write_csv(out / "errors.csv", {"rho", "eps", "rel_l2"}, rows);
    o.files.push_back(out / "errors.csv");
    o.timing["total_seconds"] = clock.seconds();
    return finish_output(std::move(o), out);
}

}  // namespace exwave
