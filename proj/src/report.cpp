#include <cmath>
#include <fstream>
#include <sstream>

#include "ewa/config.hpp"
#include "ewa/csv.hpp"
#include "ewa/error.hpp"
#include "ewa/experiments.hpp"

namespace ewa {

namespace fs = std::filesystem;

namespace {

const char* kReplicationHeader =
    "cell_id,rep,seed,ewa_int_kl,ewa_mean_kl,oracle_kl,excess_int,excess_mean,accept_rate,ess,wall_ms";

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    return os;
}

void close_out(std::ofstream& os, const fs::path& path) {
    os.close();
    if (!os) throw IoError("write failed for " + path.string());
}

struct Point {
    double x, y;
};

// Scatter plot with an optional fitted line, as a standalone SVG.
std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                     const std::vector<Point>& pts, const std::optional<stats::LinearFit>& line, bool connect) {
    const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 55;
    double x0 = pts.empty() ? 0 : pts[0].x, x1 = x0, y0 = pts.empty() ? 0 : pts[0].y, y1 = y0;
    for (const auto& p : pts) {
        x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    if (line) {
        y0 = std::min({y0, line->intercept + line->slope * x0, line->intercept + line->slope * x1});
        y1 = std::max({y1, line->intercept + line->slope * x0, line->intercept + line->slope * x1});
    }
    y0 = std::min(y0, 0.0);
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double padx = 0.05 * (x1 - x0), pady = 0.05 * (y1 - y0);
    x0 -= padx, x1 += padx, y1 += pady;
    auto sx = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
    auto sy = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };
    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
       << title << "</text>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
       << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
        os << "<text x=\"" << sx(xv) << "\" y=\"" << H - mb + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << xv << "</text>\n";
        os << "<text x=\"" << ml - 6 << "\" y=\"" << sy(yv) + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << yv << "</text>\n";
    }
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << xlabel << "</text>\n";
    os << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
       << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << ylabel << "</text>\n";
    if (line) {
        os << "<line x1=\"" << sx(x0) << "\" y1=\"" << sy(line->intercept + line->slope * x0) << "\" x2=\"" << sx(x1)
           << "\" y2=\"" << sy(line->intercept + line->slope * x1) << "\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n";
    }
    if (connect && pts.size() > 1) {
        os << "<polyline fill=\"none\" stroke=\"#2c3e50\" points=\"";
        for (const auto& p : pts) os << sx(p.x) << ',' << sy(p.y) << ' ';
        os << "\"/>\n";
    }
    for (const auto& p : pts)
        os << "<circle cx=\"" << sx(p.x) << "\" cy=\"" << sy(p.y) << "\" r=\"4\" fill=\"#2980b9\"/>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace

ReportPaths emit_report(const SuiteResult& suite, const std::optional<RateStudyResult>& rate,
                        const std::optional<TailStudyResult>& tails, const fs::path& out_dir) {
    if (suite.cells.empty()) throw ConfigError("emit_report: no results");
    ReportPaths out;
    out.dir = out_dir / ("seed_" + std::to_string(suite.config.seed));
    std::error_code ec;
    fs::create_directories(out.dir / "plots", ec);
    if (ec) throw IoError("cannot create output directory " + (out.dir / "plots").string() + ": " + ec.message());

    {
        const fs::path path = out.dir / "config_echo.json";
        auto os = open_out(path);
        os << to_json(suite.config).dump(2) << '\n';
        close_out(os, path);
        out.files.push_back(path);
    }
    {
        const fs::path path = out.dir / "replications.csv";
        auto os = open_out(path);
        os << kReplicationHeader << '\n';
        for (const auto& c : suite.cells)
            for (const auto& r : c.records)
                os << r.cell_id << ',' << r.rep << ',' << r.seed << ',' << csv::format(r.ewa_int_kl) << ','
                   << csv::format(r.ewa_mean_kl) << ',' << csv::format(r.oracle_kl) << ','
                   << csv::format(r.excess_int) << ',' << csv::format(r.excess_mean) << ','
                   << csv::format(r.accept_rate) << ',' << csv::format(r.ess) << ',' << csv::format(r.wall_ms) << '\n';
        close_out(os, path);
        out.files.push_back(path);
    }
    {
        const fs::path path = out.dir / "cells.csv";
        auto os = open_out(path);
        os << "cell_id,n,p,p0,x_norm,rate_x,oracle_kl,mean_ewa_int_kl,se_ewa_int_kl,mean_excess_int,se_excess_int,"
              "mean_excess_mean,kl_ratio,kl_ratio_se,q50,q80,q90,q95,n_flagged,n_replications\n";
        for (const auto& c : suite.cells) {
            const CellSummary s = summarize_cell(c);
            os << s.cell.id << ',' << s.cell.n << ',' << s.cell.p << ',' << s.cell.p0 << ',' << csv::format(s.x_norm)
               << ',' << csv::format(s.rate_x) << ',' << csv::format(s.oracle_kl) << ','
               << csv::format(s.mean_ewa_int_kl) << ',' << csv::format(s.se_ewa_int_kl) << ','
               << csv::format(s.mean_excess_int) << ',' << csv::format(s.se_excess_int) << ','
               << csv::format(s.mean_excess_mean) << ',' << csv::format(s.kl_ratio) << ','
               << csv::format(s.kl_ratio_se) << ',' << csv::format(s.q50) << ',' << csv::format(s.q80) << ','
               << csv::format(s.q90) << ',' << csv::format(s.q95) << ',' << s.n_flagged << ',' << s.n_replications
               << '\n';
        }
        close_out(os, path);
        out.files.push_back(path);
    }
    if (rate) {
        const fs::path path = out.dir / "ratefit.csv";
        auto os = open_out(path);
        os << "slope,intercept,r_squared,n_cells\n";
        os << csv::format(rate->fit.slope) << ',' << csv::format(rate->fit.intercept) << ','
           << csv::format(rate->fit.r_squared) << ',' << rate->cells.size() << '\n';
        close_out(os, path);
        out.files.push_back(path);

        std::vector<Point> pts;
        for (const auto& c : rate->cells) pts.push_back({c.rate_x, c.mean_excess_int});
        const fs::path svg = out.dir / "plots" / "ratefit.svg";
        auto ps = open_out(svg);
        ps << svg_plot("Mean excess KL vs p0 log(n p ||X|| / p0)", "p0 log(n p ||X|| / p0)", "mean excess KL", pts,
                       rate->fit, false);
        close_out(ps, svg);
        out.files.push_back(svg);
    }
    if (tails) {
        const fs::path path = out.dir / "tails.csv";
        auto os = open_out(path);
        os << "scope,epsilon,log_inv_eps,quantile,rate_x,bound_shape,monotone_residual,superlinear_residual,slope,pass\n";
        auto check_for = [&](const std::string& scope) -> const TailCheck& {
            if (scope == "pooled") return tails->pooled;
            for (const auto& c : tails->checks)
                if (c.scope == scope) return c;
            throw ConfigError("tail check missing for scope " + scope);
        };
        for (const auto& r : tails->rows) {
            const TailCheck& c = check_for(r.scope);
            os << r.scope << ',' << csv::format(r.epsilon) << ',' << csv::format(r.log_inv_eps) << ','
               << csv::format(r.quantile) << ',' << csv::format(r.rate_x) << ',' << csv::format(r.bound_shape) << ','
               << csv::format(c.monotone_residual) << ',' << csv::format(c.superlinear_residual) << ','
               << csv::format(c.slope) << ',' << (c.pass ? 1 : 0) << '\n';
        }
        close_out(os, path);
        out.files.push_back(path);

        std::vector<Point> pts;
        for (const auto& r : tails->rows)
            if (r.scope == "pooled") pts.push_back({r.log_inv_eps, r.quantile});
        const fs::path svg = out.dir / "plots" / "tails.svg";
        auto ps = open_out(svg);
        ps << svg_plot("Pooled (1 - eps) quantile of excess / rate", "log(1/eps)", "quantile", pts, std::nullopt, true);
        close_out(ps, svg);
        out.files.push_back(svg);
    }
    return out;
}

std::vector<ReplicationRecord> load_replications_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kReplicationHeader)
        throw DataError(path.string() + ": unexpected header");
    std::vector<ReplicationRecord> recs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != 11) {
            std::ostringstream os;
            os << path.string() << ": line " << lineno << ": expected 11 fields, found " << f.size();
            throw DataError(os.str());
        }
        try {
            ReplicationRecord r;
            r.cell_id = std::stoi(f[0]);
            r.rep = std::stoi(f[1]);
            r.seed = std::stoull(f[2]);
            r.ewa_int_kl = std::stod(f[3]);
            r.ewa_mean_kl = std::stod(f[4]);
            r.oracle_kl = std::stod(f[5]);
            r.excess_int = std::stod(f[6]);
            r.excess_mean = std::stod(f[7]);
            r.accept_rate = std::stod(f[8]);
            r.ess = std::stod(f[9]);
            r.wall_ms = std::stod(f[10]);
            recs.push_back(std::move(r));
        } catch (const std::exception&) {
            std::ostringstream os;
            os << path.string() << ": line " << lineno << ": malformed number";
            throw DataError(os.str());
        }
    }
    return recs;
}

}  // namespace ewa
