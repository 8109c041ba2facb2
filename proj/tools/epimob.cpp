// epimob: mobility / reproduction-number pipeline CLI.
//
// Subcommands: flows, rt, fda smooth|fcc|register, fof, delay, simulate,
// report. Every stage writes its artifacts atomically and drops a JSON run
// manifest (parameters, input digests, version) next to them.
//
// Exit codes: 0 ok, 1 usage or unknown stage, 2 missing prerequisite,
// 3 parameter out of range.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "epimob/analysis.hpp"
#include "epimob/config.hpp"
#include "epimob/fcc.hpp"
#include "epimob/fof.hpp"
#include "epimob/od.hpp"
#include "epimob/registration.hpp"
#include "epimob/renewal.hpp"
#include "epimob/serialize.hpp"
#include "epimob/smoothing.hpp"
#include "epimob/svg.hpp"
#include "epimob/synth.hpp"

namespace fs = std::filesystem;
using namespace epimob;

namespace {

constexpr const char* kVersion = "0.1.0";

/// Prerequisite artifact absent: exit 2, message names the expected path.
struct MissingArtifact : std::runtime_error {
    explicit MissingArtifact(const fs::path& p)
        : std::runtime_error("missing prerequisite: expected " + p.string()) {}
};

std::string require_file(const fs::path& p) {
    if (!fs::exists(p) || fs::is_directory(p)) throw MissingArtifact(p);
    return read_text_file(p);
}

void require_dir(const fs::path& p) {
    if (!fs::is_directory(p)) throw MissingArtifact(p);
}

/// Sorted *.csv (or *.json) files in a directory; stem = unit id.
std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
    require_dir(dir);
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

/// Run manifest next to the stage output: parameters, input digests, version.
void write_manifest(const fs::path& out_dir, const std::string& stage,
                    const std::map<std::string, std::string>& params,
                    const std::vector<fs::path>& inputs) {
    nlohmann::json j;
    j["stage"] = stage;
    j["version"] = kVersion;
    j["parameters"] = params;
    nlohmann::json digests = nlohmann::json::object();
    for (const fs::path& p : inputs)
        if (fs::exists(p) && !fs::is_directory(p))
            digests[p.string()] = fnv1a64_hex(read_text_file(p));
    j["inputs"] = digests;
    atomic_write_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

struct UnitSeries {
    std::string unit_id;
    DailySeries series;
};

/// Reads every CSV in a directory as a daily series; rt-stage CSVs
/// (date,mean,...) are detected by header and reduced to the mean column.
std::vector<UnitSeries> read_series_dir(const fs::path& dir, SeriesKind kind) {
    std::vector<UnitSeries> out;
    for (const fs::path& p : list_files(dir, ".csv")) {
        std::string text = read_text_file(p);
        std::string unit = p.stem().string();
        DailySeries s = text.rfind("date,mean", 0) == 0
                            ? rt_mean_from_csv_text(text, unit)
                            : series_from_csv_text(text, kind, unit);
        out.push_back({unit, std::move(s)});
    }
    if (out.empty()) throw MissingArtifact(dir / "*.csv");
    return out;
}

std::vector<SmoothedCurve> read_curve_dir(const fs::path& dir) {
    std::vector<SmoothedCurve> out;
    for (const fs::path& p : list_files(dir, ".json")) {
        if (p.filename() == "manifest.json" || p.filename() == "summary.json") continue;
        SmoothedCurve c = curve_from_json(nlohmann::json::parse(read_text_file(p)));
        if (c.unit_id.empty()) c.unit_id = p.stem().string();
        out.push_back(std::move(c));
    }
    if (out.empty()) throw MissingArtifact(dir / "*.json");
    return out;
}

/// Pads a series with leading/trailing missing values so every unit spans the
/// same [epoch, epoch+n) window and can share one spline basis.
DailySeries pad_to_window(const DailySeries& s, Date epoch, int n_days) {
    DailySeries out;
    out.unit_id = s.unit_id;
    out.kind = s.kind;
    out.start_date = epoch;
    out.values.assign(n_days, DailySeries::missing());
    int off = s.start_date - epoch;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        int idx = off + static_cast<int>(i);
        if (idx >= 0 && idx < n_days) out.values[idx] = s.values[i];
    }
    return out;
}

std::string fmt_param(double v) { return fmt_num(v); }

// ---------------------------------------------------------------------------
// flows ingest

int run_flows_ingest(const fs::path& flows_csv, const fs::path& hierarchy_csv,
                     const std::string& level_str, long long threshold, const fs::path& out) {
    SpatialLevel level = parse_level(level_str);  // throws invalid_argument -> exit 3
    require_file(hierarchy_csv);
    require_file(flows_csv);
    SpatialHierarchy h = SpatialHierarchy::read_csv(hierarchy_csv.string());
    IngestReport report;
    FlowTable raw = ingest_flows_csv(flows_csv.string(), SpatialLevel::municipality, threshold,
                                     &report);
    for (const std::string& e : report.row_errors) std::cerr << "warning: " << e << '\n';
    FlowTable table = level == SpatialLevel::municipality ? std::move(raw)
                                                          : aggregate(raw, h, level);
    int written = 0;
    for (const std::string& unit : h.units_at(level)) {
        DailySeries m = mobility_series(table, unit);
        if (m.values.empty()) continue;
        atomic_write_file(out / (unit + ".csv"), series_to_csv(m));
        ++written;
    }
    nlohmann::json meta;
    meta["level"] = level_name(level);
    meta["suppression_threshold"] = threshold;
    meta["suppressed_records"] = table.suppressed_records;
    meta["parsed_records"] = report.parsed;
    meta["units_written"] = written;
    atomic_write_file(out / "flows.json", meta.dump(2) + "\n");
    write_manifest(out, "flows",
                   {{"level", level_str},
                    {"threshold", std::to_string(threshold)},
                    {"flows", flows_csv.string()},
                    {"hierarchy", hierarchy_csv.string()}},
                   {flows_csv, hierarchy_csv});
    std::cout << "flows: wrote " << written << " unit series to " << out.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// rt

int run_rt(const fs::path& cases_path, double shape, double rate, McmcConfig cfg, int ma_window,
           const fs::path& out) {
    if (shape <= 0 || rate <= 0) throw std::invalid_argument("shape and rate must be positive");
    cfg.validate();
    GenerationTimeDist gt = discretize_generation_time(shape, rate);

    std::vector<fs::path> inputs;
    std::vector<std::pair<std::string, CaseSeries>> units;
    if (fs::is_directory(cases_path)) {
        for (const fs::path& p : list_files(cases_path, ".csv")) {
            units.emplace_back(p.stem().string(),
                               cases_from_csv_text(read_text_file(p), p.stem().string()));
            inputs.push_back(p);
        }
        if (units.empty()) throw MissingArtifact(cases_path / "*.csv");
    } else {
        units.emplace_back(cases_path.stem().string(),
                           cases_from_csv_text(require_file(cases_path),
                                               cases_path.stem().string()));
        inputs.push_back(cases_path);
    }

    const bool single = !fs::is_directory(cases_path) && units.size() == 1;
    fs::path out_dir = single ? (out.has_parent_path() ? out.parent_path() : fs::path(".")) : out;
    for (const auto& [unit, cases] : units) {
        RtPosterior post = estimate_rt(smooth_cases(cases), gt, cfg);
        for (const std::string& w : post.warnings)
            std::cerr << "warning (" << unit << "): " << w << '\n';
        fs::path dest = single ? out : out / (unit + ".csv");
        atomic_write_file(dest, rt_to_csv(post));
    }
    write_manifest(out_dir, "rt",
                   {{"cases", cases_path.string()},
                    {"shape", fmt_param(shape)},
                    {"rate", fmt_param(rate)},
                    {"gt_mean", fmt_param(gt.mean())},
                    {"seed", std::to_string(cfg.rng_seed)},
                    {"iterations", std::to_string(cfg.iterations)},
                    {"burn_in", std::to_string(cfg.burn_in)},
                    {"thinning", std::to_string(cfg.thinning)},
                    {"proposal_sd", fmt_param(cfg.proposal_sd)},
                    {"r_max", fmt_param(cfg.r_max)},
                    {"ma_window", std::to_string(ma_window)}},
                   inputs);
    std::cout << "rt: estimated " << units.size() << " unit(s)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fda smooth

int run_fda_smooth(const fs::path& in, int n_basis, int order, double lambda, bool use_gcv,
                   const fs::path& out) {
    if (n_basis < order) throw std::invalid_argument("n-basis must be >= order");
    if (!use_gcv && lambda < 0) throw std::invalid_argument("lambda must be >= 0");
    std::vector<UnitSeries> units;
    std::vector<fs::path> inputs;
    if (fs::is_directory(in)) {
        units = read_series_dir(in, SeriesKind::mobility);
        inputs = list_files(in, ".csv");
    } else {
        std::string text = require_file(in);
        std::string unit = in.stem().string();
        DailySeries s = text.rfind("date,mean", 0) == 0
                            ? rt_mean_from_csv_text(text, unit)
                            : series_from_csv_text(text, SeriesKind::mobility, unit);
        units.push_back({unit, std::move(s)});
        inputs.push_back(in);
    }

    // common window across units so every curve shares one basis
    Date epoch = units.front().series.start_date;
    Date last = units.front().series.end_date();
    for (const auto& u : units) {
        epoch = std::min(epoch, u.series.start_date);
        last = std::max(last, u.series.end_date());
    }
    int n_days = last - epoch;
    auto basis = std::make_shared<BSplineBasis>(0.0, n_days - 1.0, n_basis, order);
    std::vector<DailySeries> padded;
    for (const auto& u : units) padded.push_back(pad_to_window(u.series, epoch, n_days));

    std::vector<std::string> warnings;
    double chosen = lambda;
    if (use_gcv) chosen = gcv_select(padded, *basis, log_lambda_grid(), &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';

    for (const DailySeries& s : padded) {
        SmoothedCurve c = penalized_smooth(s, basis, chosen);
        atomic_write_file(out / (s.unit_id + ".json"), curve_to_json(c).dump(2) + "\n");
    }
    nlohmann::json meta;
    meta["lambda"] = chosen;
    meta["lambda_from_gcv"] = use_gcv;
    meta["n_basis"] = n_basis;
    meta["order"] = order;
    meta["epoch"] = epoch.to_string();
    meta["n_days"] = n_days;
    atomic_write_file(out / "summary.json", meta.dump(2) + "\n");
    write_manifest(out, "fda-smooth",
                   {{"in", in.string()},
                    {"n_basis", std::to_string(n_basis)},
                    {"order", std::to_string(order)},
                    {"lambda", fmt_param(chosen)}},
                   inputs);
    std::cout << "fda smooth: " << units.size() << " curve(s), lambda " << fmt_num(chosen) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// fda fcc / register helpers

/// Pairs r and m curve sets by unit id; both directories must cover the same
/// units.
std::pair<std::vector<SmoothedCurve>, std::vector<SmoothedCurve>> paired_curves(
    const fs::path& r_dir, const fs::path& m_dir) {
    auto rs = read_curve_dir(r_dir);
    auto ms = read_curve_dir(m_dir);
    std::map<std::string, SmoothedCurve> by_id;
    for (auto& m : ms) by_id[m.unit_id] = std::move(m);
    std::vector<SmoothedCurve> r_out, m_out;
    for (auto& r : rs) {
        auto it = by_id.find(r.unit_id);
        if (it == by_id.end()) throw MissingArtifact(m_dir / (r.unit_id + ".json"));
        r_out.push_back(std::move(r));
        m_out.push_back(std::move(it->second));
    }
    return {std::move(r_out), std::move(m_out)};
}

int run_fda_fcc(const fs::path& r_dir, const fs::path& m_dir, const fs::path& out) {
    auto [rs, ms] = paired_curves(r_dir, m_dir);
    std::vector<SmoothedCurve> rn, mn;
    for (const auto& c : rs) rn.push_back(normalize_by_max(c));
    for (const auto& c : ms) mn.push_back(normalize_by_max(c));
    FccResult fcc = first_fcc(rn, mn);
    atomic_write_file(out / "weight_r.json", curve_to_json(fcc.weight_first).dump(2) + "\n");
    atomic_write_file(out / "weight_m.json", curve_to_json(fcc.weight_second).dump(2) + "\n");
    std::ostringstream scores;
    scores << "unit,score_r,score_m\n";
    for (std::size_t i = 0; i < rs.size(); ++i)
        scores << rs[i].unit_id << ',' << fmt_num(fcc.scores_first[i]) << ','
               << fmt_num(fcc.scores_second[i]) << '\n';
    atomic_write_file(out / "scores.csv", scores.str());
    nlohmann::json meta;
    meta["explained_fraction"] = fcc.explained_fraction;
    meta["n_units"] = rs.size();
    atomic_write_file(out / "summary.json", meta.dump(2) + "\n");
    write_manifest(out, "fda-fcc", {{"r", r_dir.string()}, {"m", m_dir.string()}},
                   list_files(r_dir, ".json"));
    std::cout << "fda fcc: explained fraction " << fmt_num(fcc.explained_fraction) << '\n';
    return 0;
}

int run_fda_register(const fs::path& r_dir, const fs::path& m_dir, double cap,
                     const fs::path& out) {
    if (cap <= 0) throw std::invalid_argument("cap must be positive");
    auto [rs, ms] = paired_curves(r_dir, m_dir);
    // shifts are estimated on normalized curves against each unit's own FCC
    // projection; raw scales are preserved in the registered output
    std::vector<SmoothedCurve> rn, mn;
    for (const auto& c : rs) rn.push_back(normalize_by_max(c));
    for (const auto& c : ms) mn.push_back(normalize_by_max(c));
    FccResult fcc = first_fcc(rn, mn);
    std::vector<SmoothedCurve> reg_r, reg_m;
    std::vector<double> shifts;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        SmoothedCurve target = project_fcc(rn[i], fcc, FccSet::first);
        double delta = estimate_shift(rn[i], target, cap);
        shifts.push_back(delta);
        auto [r_shifted, m_shifted] = register_pair(rs[i], ms[i], delta);
        reg_r.push_back(std::move(r_shifted));
        reg_m.push_back(std::move(m_shifted));
    }
    std::vector<SmoothedCurve> all;
    all.insert(all.end(), reg_r.begin(), reg_r.end());
    all.insert(all.end(), reg_m.begin(), reg_m.end());
    auto [lo, hi] = restrict_common_domain(all);
    for (std::size_t i = 0; i < rs.size(); ++i) {
        atomic_write_file(out / "r" / (rs[i].unit_id + ".json"),
                          curve_to_json(all[i]).dump(2) + "\n");
        atomic_write_file(out / "m" / (ms[i].unit_id + ".json"),
                          curve_to_json(all[rs.size() + i]).dump(2) + "\n");
    }
    std::ostringstream sh;
    sh << "unit,shift_days\n";
    for (std::size_t i = 0; i < rs.size(); ++i)
        sh << rs[i].unit_id << ',' << fmt_num(shifts[i]) << '\n';
    atomic_write_file(out / "shifts.csv", sh.str());
    nlohmann::json meta;
    meta["common_domain"] = {lo, hi};
    meta["cap"] = cap;
    atomic_write_file(out / "summary.json", meta.dump(2) + "\n");
    write_manifest(out, "fda-register",
                   {{"r", r_dir.string()}, {"m", m_dir.string()}, {"cap", fmt_param(cap)}},
                   list_files(r_dir, ".json"));
    std::cout << "fda register: common domain [" << fmt_num(lo) << ", " << fmt_num(hi) << "]\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fof

int run_fof(const fs::path& y_dir, const fs::path& x_dir, int ks, int kt, double lambda_s,
            double lambda_t, double lag, double level, const fs::path& pc1_csv,
            const fs::path& out) {
    if (ks < 4 || kt < 4) throw std::invalid_argument("ks and kt must be >= 4");
    if (level <= 0 || level >= 1) throw std::invalid_argument("level must be in (0,1)");
    if (lag < 0) throw std::invalid_argument("lag must be >= 0");
    auto [ys, xs] = paired_curves(y_dir, x_dir);

    FoFFit fit;
    std::optional<double> pc1_explained;
    if (!pc1_csv.empty()) {
        // covariate table: unit,<name1>,<name2>,... reduced to its first PC
        std::string text = require_file(pc1_csv);
        std::map<std::string, std::vector<double>> rows;
        std::istringstream in(text);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> f = csv::split_row(line);
            std::vector<double> vals;
            for (std::size_t i = 1; i < f.size(); ++i) vals.push_back(std::stod(f[i]));
            rows[f[0]] = std::move(vals);
        }
        std::vector<std::vector<double>> cov;
        for (const auto& y : ys) {
            auto it = rows.find(y.unit_id);
            if (it == rows.end())
                throw std::invalid_argument("pc1 table has no row for unit " + y.unit_id);
            cov.push_back(it->second);
        }
        double expl = 0.0;
        std::vector<double> z = compute_pc1(cov, &expl);
        pc1_explained = expl;
        fit = fit_fof_with_scalar(ys, xs, z, ks, kt, lambda_s, lambda_t);
    } else {
        fit = fit_fof(ys, xs, ks, kt, lambda_s, lambda_t);
    }
    for (const std::string& w : fit.warnings) std::cerr << "warning: " << w << '\n';

    BandSurface band = confidence_band(fit, level);
    std::ostringstream surf;
    surf << "s,t,beta,se\n";
    for (std::size_t i = 0; i < band.s_grid.size(); ++i)
        for (std::size_t j = 0; j < band.t_grid.size(); ++j)
            surf << fmt_num(band.s_grid[i]) << ',' << fmt_num(band.t_grid[j]) << ','
                 << fmt_num(band.value(i, j)) << ',' << fmt_num(band.se(i, j)) << '\n';
    atomic_write_file(out / "surface.csv", surf.str());

    LagSlice slice = lag_slice(fit, lag, level);
    std::ostringstream sl;
    sl << "s,beta,lo,hi,significant\n";
    for (std::size_t i = 0; i < slice.s.size(); ++i) {
        bool sig = slice.lower[i] > 0 || slice.upper[i] < 0;
        sl << fmt_num(slice.s[i]) << ',' << fmt_num(slice.value[i]) << ','
           << fmt_num(slice.lower[i]) << ',' << fmt_num(slice.upper[i]) << ',' << (sig ? 1 : 0)
           << '\n';
    }
    atomic_write_file(out / "slice.csv", sl.str());

    nlohmann::json meta;
    meta["r_squared"] = fit.r_squared;
    meta["lambda_s"] = fit.lambda_s;
    meta["lambda_t"] = fit.lambda_t;
    meta["lag"] = lag;
    meta["level"] = level;
    meta["n_units"] = ys.size();
    if (fit.partial_r2_mobility) meta["partial_r2_mobility"] = *fit.partial_r2_mobility;
    if (fit.partial_r2_pc) meta["partial_r2_pc"] = *fit.partial_r2_pc;
    if (pc1_explained) meta["pc1_explained_fraction"] = *pc1_explained;
    nlohmann::json sig = nlohmann::json::array();
    for (const auto& [a, b] : slice.significant_intervals) sig.push_back({a, b});
    meta["significant_intervals"] = sig;
    meta["warnings"] = fit.warnings;
    atomic_write_file(out / "summary.json", meta.dump(2) + "\n");
    write_manifest(out, "fof",
                   {{"y", y_dir.string()},
                    {"x", x_dir.string()},
                    {"ks", std::to_string(ks)},
                    {"kt", std::to_string(kt)},
                    {"lambda_s", fmt_param(lambda_s)},
                    {"lambda_t", fmt_param(lambda_t)},
                    {"lag", fmt_param(lag)},
                    {"level", fmt_param(level)}},
                   list_files(y_dir, ".json"));
    std::cout << "fof: R^2 " << fmt_num(fit.r_squared) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// delay

int run_delay(const fs::path& rt_dir, const fs::path& mob_dir, const fs::path& cases_dir,
              const fs::path& pop_csv, const std::string& as_of_str, int baseline_days,
              double reduction, bool smooth_mobility, const fs::path& out) {
    if (baseline_days < 1) throw std::invalid_argument("baseline window must be >= 1 day");
    if (reduction <= 0 || reduction >= 1)
        throw std::invalid_argument("reduction fraction must be in (0,1)");
    Date as_of = Date::parse(as_of_str);
    auto rt_units = read_series_dir(rt_dir, SeriesKind::rt_mean);
    auto mob_units = read_series_dir(mob_dir, SeriesKind::mobility);
    std::map<std::string, DailySeries> mob;
    for (auto& u : mob_units) mob[u.unit_id] = std::move(u.series);

    std::map<std::string, double> population;
    if (!pop_csv.empty()) {
        std::istringstream in(require_file(pop_csv));
        std::string line;
        std::getline(in, line);  // header unit_id,population
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto f = csv::split_row(line);
            if (f.size() != 2) throw std::invalid_argument("bad population row: " + line);
            population[f[0]] = std::stod(f[1]);
        }
    }

    std::vector<DelayRecord> records;
    for (const auto& [unit, rt_raw] : rt_units) {
        auto it = mob.find(unit);
        if (it == mob.end()) throw MissingArtifact(mob_dir / (unit + ".csv"));
        DailySeries rt = rt_raw;
        rt.values = moving_average(rt.values, 3);  // 7-day display convention
        DailySeries m = it->second;
        if (smooth_mobility) m.values = moving_average(m.values, 3);
        double baseline =
            baseline_mobility(m, m.start_date, m.start_date + (baseline_days - 1));
        DelayRecord rec = delay_in_mobility_reduction(rt, m, baseline, reduction);
        if (!cases_dir.empty() && population.count(unit)) {
            fs::path cp = cases_dir / (unit + ".csv");
            CaseSeries cs = cases_from_csv_text(require_file(cp), unit);
            rec.incidence_per_100k = incidence_per_100k(cs, population.at(unit), as_of);
            for (double c : cs.counts) rec.total_cases += c;
        }
        records.push_back(std::move(rec));
    }
    atomic_write_file(out / "delay.csv", delay_to_csv(records));

    // scatter of delay vs incidence, with the Pearson fit when estimable
    std::vector<double> xs, ys;
    for (const auto& r : records)
        if (r.delay_days && r.incidence_per_100k > 0) {
            xs.push_back(r.incidence_per_100k);
            ys.push_back(*r.delay_days);
        }
    nlohmann::json scatter;
    scatter["n_points"] = xs.size();
    scatter["incidence_100k"] = xs;
    scatter["delay_days"] = ys;
    if (xs.size() >= 3) {
        try {
            PearsonFit f = pearson_fit(xs, ys);
            scatter["fit"] = {{"r", f.r},         {"p_value", f.p_value},
                              {"slope", f.slope}, {"intercept", f.intercept},
                              {"r_squared", f.r_squared}};
        } catch (const std::invalid_argument&) {
            scatter["fit"] = nullptr;  // constant input
        }
    }
    atomic_write_file(out / "scatter.json", scatter.dump(2) + "\n");
    write_manifest(out, "delay",
                   {{"rt", rt_dir.string()},
                    {"mob", mob_dir.string()},
                    {"as_of", as_of_str},
                    {"baseline_days", std::to_string(baseline_days)},
                    {"reduction", fmt_param(reduction)},
                    {"mobility_ma", smooth_mobility ? "7" : "off"}},
                   list_files(rt_dir, ".csv"));
    std::cout << "delay: " << records.size() << " unit(s)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

synth::Scenario scenario_from_config(const KeyValueConfig& cfg) {
    synth::Scenario sc;
    const std::string s = "scenario";
    sc.n_days = cfg.get_int(s, "n_days", sc.n_days);
    sc.seed_cases = cfg.get_double(s, "seed_cases", sc.seed_cases);
    sc.seed_days = cfg.get_int(s, "seed_days", sc.seed_days);
    sc.gamma_shape = cfg.get_double(s, "shape", sc.gamma_shape);
    sc.gamma_rate = cfg.get_double(s, "rate", sc.gamma_rate);
    sc.mobility_pre_level = cfg.get_double(s, "pre_level", sc.mobility_pre_level);
    sc.mobility_post_fraction = cfg.get_double(s, "post_fraction", sc.mobility_post_fraction);
    sc.mobility_switch_day = cfg.get_int(s, "switch_day", sc.mobility_switch_day);
    sc.transition_half_life = cfg.get_double(s, "half_life", sc.transition_half_life);
    sc.weekly_amplitude = cfg.get_double(s, "weekly_amplitude", sc.weekly_amplitude);
    sc.lag_days = cfg.get_int(s, "lag_days", sc.lag_days);
    sc.case_noise = cfg.get_double(s, "case_noise", sc.case_noise);
    sc.mobility_noise_sd = cfg.get_double(s, "mobility_noise_sd", sc.mobility_noise_sd);
    sc.rng_seed = static_cast<std::uint64_t>(cfg.get_double(s, "seed", 0));
    std::string mode = cfg.get_string(s, "r_mode", "step");
    if (mode == "step")
        sc.r_trajectory.mode = synth::RTrajectory::Mode::step;
    else if (mode == "linear")
        sc.r_trajectory.mode = synth::RTrajectory::Mode::linear;
    else
        throw std::invalid_argument("r_mode must be step or linear");
    std::string bp = cfg.get_string(s, "r_breakpoints", "0:1.5");
    std::istringstream in(bp);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        auto colon = tok.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("r_breakpoints entries must be day:value");
        sc.r_trajectory.breakpoints.emplace_back(std::stoi(tok.substr(0, colon)),
                                                 std::stod(tok.substr(colon + 1)));
    }
    sc.validate();
    return sc;
}

int run_simulate(const fs::path& scenario_path, int units_override, std::int64_t seed_override,
                 const fs::path& out) {
    KeyValueConfig cfg = KeyValueConfig::parse(require_file(scenario_path));
    synth::Scenario sc = scenario_from_config(cfg);
    if (seed_override >= 0) sc.rng_seed = static_cast<std::uint64_t>(seed_override);
    int units = units_override > 0 ? units_override : cfg.get_int("scenario", "units", 20);
    if (units < 1) throw std::invalid_argument("units must be >= 1");
    std::string mode = cfg.get_string("scenario", "mode", "renewal");

    if (mode == "renewal") {
        for (int i = 0; i < units; ++i) {
            synth::Scenario unit_sc = sc;
            unit_sc.rng_seed = sc.rng_seed * 1000003ULL + static_cast<std::uint64_t>(i);
            std::string unit = "unit" + std::string(i < 10 ? "0" : "") + std::to_string(i);
            CaseSeries cs = synth::simulate_renewal(unit_sc, unit);
            DailySeries m = synth::simulate_mobility(unit_sc, unit);
            atomic_write_file(out / "cases" / (unit + ".csv"), cases_to_csv(cs));
            atomic_write_file(out / "mobility" / (unit + ".csv"), series_to_csv(m));
        }
    } else if (mode == "epimob") {
        synth::EpiMobEnsemble ens = synth::make_epimob_ensemble(units, sc);
        for (int i = 0; i < units; ++i) {
            std::string unit = "unit" + std::string(i < 10 ? "0" : "") + std::to_string(i);
            ens.r_series[i].unit_id = unit;
            ens.m_series[i].unit_id = unit;
            atomic_write_file(out / "rt" / (unit + ".csv"), series_to_csv(ens.r_series[i]));
            atomic_write_file(out / "mobility" / (unit + ".csv"),
                              series_to_csv(ens.m_series[i]));
        }
    } else {
        throw std::invalid_argument("mode must be renewal or epimob");
    }

    nlohmann::json truth;
    truth["mode"] = mode;
    truth["units"] = units;
    truth["seed"] = sc.rng_seed;
    truth["lag_days"] = sc.lag_days;
    truth["switch_day"] = sc.mobility_switch_day;
    truth["post_fraction"] = sc.mobility_post_fraction;
    atomic_write_file(out / "truth.json", truth.dump(2) + "\n");
    std::map<std::string, std::string> params;
    for (const auto& [k, v] : cfg.entries()) params[k] = v;
    params["scenario"] = scenario_path.string();
    params["units"] = std::to_string(units);
    params["seed"] = std::to_string(sc.rng_seed);
    write_manifest(out, "simulate", params, {scenario_path});
    std::cout << "simulate: " << units << " unit(s), mode " << mode << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// report

std::vector<double> normalized(const std::vector<double>& v) {
    double m = 0;
    for (double x : v)
        if (!DailySeries::is_missing(x)) m = std::max(m, std::abs(x));
    if (m == 0) m = 1;
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = DailySeries::is_missing(v[i]) ? v[i] : v[i] / m;
    return out;
}

int run_report(const fs::path& rt_dir, const fs::path& mob_dir, const fs::path& cases_dir,
               const fs::path& delay_dir, const fs::path& fof_dir, const fs::path& out) {
    auto rt_units = read_series_dir(rt_dir, SeriesKind::rt_mean);
    auto mob_units = read_series_dir(mob_dir, SeriesKind::mobility);
    std::map<std::string, DailySeries> mob;
    for (auto& u : mob_units) mob[u.unit_id] = std::move(u.series);

    // one normalized dual-axis chart per unit, with its co-emitted CSV
    int charts = 0;
    for (const auto& [unit, rt] : rt_units) {
        auto it = mob.find(unit);
        if (it == mob.end()) throw MissingArtifact(mob_dir / (unit + ".csv"));
        const DailySeries& m = it->second;
        std::vector<double> cases_vals;
        Date cases_start;
        if (!cases_dir.empty()) {
            fs::path cp = cases_dir / (unit + ".csv");
            CaseSeries cs = cases_from_csv_text(require_file(cp), unit);
            cases_vals = cs.counts;
            cases_start = cs.start_date;
        }
        Date start = std::min(rt.start_date, m.start_date);
        Date last = std::max(rt.end_date(), m.end_date());
        if (!cases_vals.empty()) {
            start = std::min(start, cases_start);
            last = std::max(last, cases_start + static_cast<int>(cases_vals.size()));
        }
        int n = last - start;
        auto column = [&](const std::vector<double>& vals, Date s0) {
            std::vector<double> col(n, DailySeries::missing());
            for (std::size_t i = 0; i < vals.size(); ++i) col[(s0 - start) + i] = vals[i];
            return normalized(col);
        };
        std::vector<double> rt_col = column(rt.values, rt.start_date);
        std::vector<double> m_col = column(m.values, m.start_date);
        std::vector<double> c_col = cases_vals.empty() ? std::vector<double>()
                                                       : column(cases_vals, cases_start);
        std::ostringstream csv_out;
        csv_out << (c_col.empty() ? "date,rt,mobility\n" : "date,rt,mobility,cases\n");
        std::vector<double> day_axis(n);
        for (int t = 0; t < n; ++t) {
            day_axis[t] = t;
            csv_out << (start + t).to_string() << ',';
            csv_out << (DailySeries::is_missing(rt_col[t]) ? "" : fmt_num(rt_col[t])) << ',';
            csv_out << (DailySeries::is_missing(m_col[t]) ? "" : fmt_num(m_col[t]));
            if (!c_col.empty())
                csv_out << ','
                        << (DailySeries::is_missing(c_col[t]) ? "" : fmt_num(c_col[t]));
            csv_out << '\n';
        }
        std::vector<svg::Line> lines = {{"R_t (norm)", "firebrick", day_axis, rt_col},
                                        {"M_t (norm)", "steelblue", day_axis, m_col}};
        if (!c_col.empty()) lines.push_back({"cases (norm)", "darkgreen", day_axis, c_col});
        atomic_write_file(out / ("unit_" + unit + "_series.csv"), csv_out.str());
        atomic_write_file(out / ("unit_" + unit + "_series.svg"),
                          svg::line_chart("unit " + unit, lines));
        ++charts;
    }
    if (charts == 0) throw MissingArtifact(rt_dir / "*.csv");

    // delay-vs-incidence scatter from the delay stage output
    fs::path delay_csv = delay_dir / "delay.csv";
    std::string delay_text = require_file(delay_csv);
    std::vector<double> xs, ys;
    std::vector<std::string> units;
    {
        std::istringstream in(delay_text);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto f = csv::split_row(line);
            if (f.size() != 6 || f[3].empty() || f[3] == "unbounded" || f[4].empty()) continue;
            double inc = std::stod(f[4]);
            if (inc <= 0) continue;
            units.push_back(f[0]);
            xs.push_back(inc);
            ys.push_back(std::stod(f[3]));
        }
    }
    bool with_fit = false;
    PearsonFit f;
    if (xs.size() >= 3) {
        try {
            f = pearson_fit(xs, ys);
            with_fit = true;
        } catch (const std::invalid_argument&) {
        }
    }
    std::ostringstream sc_csv;
    sc_csv << "unit,incidence_100k,delay_days,fit\n";
    for (std::size_t i = 0; i < xs.size(); ++i)
        sc_csv << units[i] << ',' << fmt_num(xs[i]) << ',' << fmt_num(ys[i]) << ','
               << (with_fit ? fmt_num(f.intercept + f.slope * xs[i]) : "") << '\n';
    atomic_write_file(out / "delay_scatter.csv", sc_csv.str());
    atomic_write_file(out / "delay_scatter.svg",
                      svg::scatter_chart("delay vs cumulative incidence", xs, ys, f.slope,
                                         f.intercept, with_fit));

    // regression plots straight from the fof stage artifacts; the CSVs are
    // byte copies so re-parsing matches the stage outputs exactly
    std::string surface_text = require_file(fof_dir / "surface.csv");
    std::string slice_text = require_file(fof_dir / "slice.csv");
    atomic_write_file(out / "beta_surface.csv", surface_text);
    atomic_write_file(out / "lag_slice.csv", slice_text);
    {
        std::istringstream in(surface_text);
        std::string line;
        std::getline(in, line);
        std::vector<double> sv, tv;
        std::map<std::pair<double, double>, double> vals;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto fcols = csv::split_row(line);
            double s = std::stod(fcols[0]), t = std::stod(fcols[1]);
            if (sv.empty() || sv.back() != s) sv.push_back(s);
            vals[{s, t}] = std::stod(fcols[2]);
        }
        for (const auto& [k, v] : vals)
            if (k.first == sv.front()) tv.push_back(k.second);
        std::sort(tv.begin(), tv.end());
        std::vector<std::vector<double>> z;
        for (double s : sv) {
            std::vector<double> row;
            for (double t : tv) row.push_back(vals.at({s, t}));
            z.push_back(std::move(row));
        }
        atomic_write_file(out / "beta_surface.svg",
                          svg::heatmap_chart("beta(s, t)", sv, tv, z));
    }
    {
        std::istringstream in(slice_text);
        std::string line;
        std::getline(in, line);
        std::vector<double> sv, mid, lo, hi;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto fcols = csv::split_row(line);
            sv.push_back(std::stod(fcols[0]));
            mid.push_back(std::stod(fcols[1]));
            lo.push_back(std::stod(fcols[2]));
            hi.push_back(std::stod(fcols[3]));
        }
        atomic_write_file(out / "lag_slice.svg",
                          svg::band_chart("beta(s, s + lag)", sv, mid, lo, hi));
    }

    write_manifest(out, "report",
                   {{"rt", rt_dir.string()},
                    {"mob", mob_dir.string()},
                    {"delay", delay_dir.string()},
                    {"fof", fof_dir.string()}},
                   {delay_csv, fof_dir / "surface.csv", fof_dir / "slice.csv"});
    std::cout << "report: " << charts << " unit chart(s) + scatter + 2 regression plots\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"epimob: mobility and reproduction-number analysis pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    std::string config_path;
    app.add_option("--config", config_path, "key/value config file with [stage] sections");

    auto cfg_or_empty = [&]() {
        if (config_path.empty()) return KeyValueConfig();
        return KeyValueConfig::parse(require_file(config_path));
    };

    // flows ingest
    auto* flows = app.add_subcommand("flows", "origin-destination flow ingestion");
    flows->require_subcommand(1);
    auto* ingest = flows->add_subcommand("ingest", "ingest and aggregate raw flows");
    std::string fl_flows, fl_hier, fl_level = "region", fl_out = "flows";
    long long fl_threshold = 15;
    ingest->add_option("--flows", fl_flows, "raw flows CSV (date,origin,destination,trips)")
        ->required();
    ingest->add_option("--hierarchy", fl_hier, "hierarchy CSV")->required();
    ingest->add_option("--level", fl_level, "target level (municipality|province|region)");
    ingest->add_option("--threshold", fl_threshold, "suppression threshold (trips < t dropped)");
    ingest->add_option("--out", fl_out, "output directory");

    // rt
    auto* rt = app.add_subcommand("rt", "estimate the net reproduction number");
    std::string rt_cases, rt_out = "rt.csv";
    double rt_shape = 1.87, rt_rate = 0.28;
    McmcConfig rt_cfg;
    int rt_ma = 7;
    rt->add_option("--cases", rt_cases, "cases CSV (date,count) or directory of them")
        ->required();
    rt->add_option("--shape", rt_shape, "generation-time gamma shape");
    rt->add_option("--rate", rt_rate, "generation-time gamma rate");
    rt->add_option("--seed", rt_cfg.rng_seed, "RNG seed");
    rt->add_option("--iterations", rt_cfg.iterations, "MH iterations per day");
    rt->add_option("--burn-in", rt_cfg.burn_in, "burn-in iterations");
    rt->add_option("--thinning", rt_cfg.thinning, "keep every k-th sample");
    rt->add_option("--proposal-sd", rt_cfg.proposal_sd, "log-walk proposal sd");
    rt->add_option("--r-max", rt_cfg.r_max, "flat prior upper bound");
    rt->add_option("--ma-window", rt_ma, "posterior-mean moving-average window");
    rt->add_option("--out", rt_out, "output CSV (or directory for directory input)");

    // fda
    auto* fda = app.add_subcommand("fda", "functional data analysis");
    fda->require_subcommand(1);
    auto* smooth = fda->add_subcommand("smooth", "penalized B-spline smoothing");
    std::string sm_in, sm_out = "curves";
    int sm_nbasis = 32, sm_order = 4;
    double sm_lambda = -1;
    smooth->add_option("--in", sm_in, "series CSV or directory")->required();
    smooth->add_option("--n-basis", sm_nbasis, "number of basis functions");
    smooth->add_option("--order", sm_order, "spline order");
    smooth->add_option("--lambda", sm_lambda, "penalty (omit to select by GCV)");
    smooth->add_option("--out", sm_out, "output directory");

    auto* fcc_cmd = fda->add_subcommand("fcc", "first functional covariance component");
    std::string fc_r, fc_m, fc_out = "fcc";
    fcc_cmd->add_option("--r", fc_r, "directory of R_t curve JSONs")->required();
    fcc_cmd->add_option("--m", fc_m, "directory of M_t curve JSONs")->required();
    fcc_cmd->add_option("--out", fc_out, "output directory");

    auto* reg = fda->add_subcommand("register", "shift registration of paired curves");
    std::string rg_r, rg_m, rg_out = "registered";
    double rg_cap = 20.0;
    reg->add_option("--r", rg_r, "directory of R_t curve JSONs")->required();
    reg->add_option("--m", rg_m, "directory of M_t curve JSONs")->required();
    reg->add_option("--cap", rg_cap, "maximum shift in days");
    reg->add_option("--out", rg_out, "output directory");

    // fof
    auto* fof = app.add_subcommand("fof", "function-on-function regression");
    std::string ff_y, ff_x, ff_pc1, ff_out = "fof";
    int ff_ks = 10, ff_kt = 10;
    double ff_ls = 1e-2, ff_lt = 1e-2, ff_lag = 13.0, ff_level = 0.95;
    fof->add_option("--y", ff_y, "directory of response (R_t) curve JSONs")->required();
    fof->add_option("--x", ff_x, "directory of predictor (M_t) curve JSONs")->required();
    fof->add_option("--ks", ff_ks, "basis size in s");
    fof->add_option("--kt", ff_kt, "basis size in t");
    fof->add_option("--lambda-s", ff_ls, "roughness penalty in s");
    fof->add_option("--lambda-t", ff_lt, "roughness penalty in t");
    fof->add_option("--lag", ff_lag, "lag slice offset in days");
    fof->add_option("--level", ff_level, "confidence level");
    fof->add_option("--pc1", ff_pc1, "covariate table CSV for the PC1 scalar term");
    fof->add_option("--out", ff_out, "output directory");

    // delay
    auto* delay = app.add_subcommand("delay", "delay in mobility reduction");
    std::string dl_rt, dl_mob, dl_cases, dl_pop, dl_asof = "2020-05-15", dl_out = "delay";
    int dl_baseline = 14;
    double dl_reduction = 0.8;
    bool dl_no_ma = false;
    delay->add_option("--rt", dl_rt, "directory of rt CSVs")->required();
    delay->add_option("--mob", dl_mob, "directory of mobility series CSVs")->required();
    delay->add_option("--cases", dl_cases, "directory of cases CSVs (for incidence)");
    delay->add_option("--pop", dl_pop, "population CSV (unit_id,population)");
    delay->add_option("--as-of", dl_asof, "incidence cutoff date");
    delay->add_option("--baseline-days", dl_baseline, "baseline window length");
    delay->add_option("--reduction", dl_reduction, "reduction fraction threshold");
    delay->add_flag("--no-ma", dl_no_ma, "compare raw mobility instead of the 7-day MA");
    delay->add_option("--out", dl_out, "output directory");

    // simulate
    auto* sim = app.add_subcommand("simulate", "synthetic scenario generator");
    std::string si_scenario, si_out = "synth";
    int si_units = 0;
    std::int64_t si_seed = -1;
    sim->add_option("--scenario", si_scenario, "scenario config file")->required();
    sim->add_option("--units", si_units, "number of synthetic units");
    sim->add_option("--seed", si_seed, "override the scenario seed");
    sim->add_option("--out", si_out, "output directory");

    // report
    auto* rep = app.add_subcommand("report", "plots and report bundle");
    std::string rp_rt, rp_mob, rp_cases, rp_delay, rp_fof, rp_out = "report";
    rep->add_option("--rt", rp_rt, "directory of rt CSVs")->required();
    rep->add_option("--mob", rp_mob, "directory of mobility series CSVs")->required();
    rep->add_option("--cases", rp_cases, "directory of cases CSVs");
    rep->add_option("--delay", rp_delay, "delay stage output directory")->required();
    rep->add_option("--fof", rp_fof, "fof stage output directory")->required();
    rep->add_option("--out", rp_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // unknown stage or bad usage
    }

    try {
        KeyValueConfig cfg = cfg_or_empty();
        if (*ingest) {
            fl_threshold = cfg.has("flows", "threshold")
                               ? cfg.get_int("flows", "threshold", 15)
                               : fl_threshold;
            return run_flows_ingest(fl_flows, fl_hier, fl_level, fl_threshold, fl_out);
        }
        if (*rt) {
            rt_cfg.iterations = cfg.get_int("rt", "iterations", rt_cfg.iterations);
            rt_cfg.burn_in = cfg.get_int("rt", "burn_in", rt_cfg.burn_in);
            rt_cfg.thinning = cfg.get_int("rt", "thinning", rt_cfg.thinning);
            rt_cfg.proposal_sd = cfg.get_double("rt", "proposal_sd", rt_cfg.proposal_sd);
            rt_cfg.r_max = cfg.get_double("rt", "r_max", rt_cfg.r_max);
            rt_shape = cfg.get_double("rt", "shape", rt_shape);
            rt_rate = cfg.get_double("rt", "rate", rt_rate);
            return run_rt(rt_cases, rt_shape, rt_rate, rt_cfg, rt_ma, rt_out);
        }
        if (*smooth)
            return run_fda_smooth(sm_in, sm_nbasis, sm_order, sm_lambda, sm_lambda < 0, sm_out);
        if (*fcc_cmd) return run_fda_fcc(fc_r, fc_m, fc_out);
        if (*reg) return run_fda_register(rg_r, rg_m, rg_cap, rg_out);
        if (*fof)
            return run_fof(ff_y, ff_x, ff_ks, ff_kt, ff_ls, ff_lt, ff_lag, ff_level, ff_pc1,
                           ff_out);
        if (*delay)
            return run_delay(dl_rt, dl_mob, dl_cases, dl_pop, dl_asof, dl_baseline, dl_reduction,
                             !dl_no_ma, dl_out);
        if (*sim) return run_simulate(si_scenario, si_units, si_seed, si_out);
        if (*rep) return run_report(rp_rt, rp_mob, rp_cases, rp_delay, rp_fof, rp_out);
        std::cerr << "unknown stage\n";
        return 1;
    } catch (const MissingArtifact& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
