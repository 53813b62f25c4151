#include "cardiored/archive.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cardiored/error.hpp"

namespace cardiored {

using nlohmann::json;

namespace {

constexpr const char* kPodMagic = "podb v1";
constexpr const char* kDeimMagic = "deim v1";

void put_i64(std::ostream& out, std::int64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

void put_f64(std::ostream& out, const double* p, std::size_t count) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
}

std::int64_t get_i64(std::istream& in) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw FormatError("archive truncated");
    return v;
}

void get_f64(std::istream& in, double* p, std::size_t count) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw FormatError("archive truncated");
}

void expect_line(std::istream& in, const char* magic) {
    std::string line;
    std::getline(in, line);
    if (line != magic) throw FormatError(fmt::format("expected '{}' section, found '{}'", magic, line));
}

Eigen::Index checked_dim(std::int64_t v, const char* what) {
    if (v < 0 || v > (std::int64_t{1} << 40)) throw FormatError(fmt::format("archive: bad {} {}", what, v));
    return static_cast<Eigen::Index>(v);
}

void put_matrix(std::ostream& out, const Eigen::MatrixXd& A) { put_f64(out, A.data(), static_cast<std::size_t>(A.size())); }

Eigen::MatrixXd get_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd A(rows, cols);
    get_f64(in, A.data(), static_cast<std::size_t>(A.size()));
    return A;
}

std::string meta_lines(const FileMeta& meta) {
    return fmt::format("# cardiored {}\n# config {}\n", meta.version, meta.config_hash);
}

void check_orthonormal(const PodBasis& b, const char* what) {
    const Eigen::MatrixXd G = b.modes.transpose() * b.modes;
    const double err = (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
    if (!(err < 1e-10)) throw FormatError(fmt::format("{} basis fails the orthonormality check ({:.3g})", what, err));
}

}  // namespace

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write '" + tmp.string() + "'");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw FormatError("write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

void write_pod(std::ostream& out, const PodBasis& b) {
    out << kPodMagic << '\n';
    const std::uint8_t tag = b.field == SnapshotField::u ? 0 : 1;
    out.write(reinterpret_cast<const char*>(&tag), 1);
    put_f64(out, &b.sigma_gen.ml, 1);
    put_f64(out, &b.sigma_gen.mt, 1);
    put_i64(out, b.size());
    put_i64(out, b.rank());
    put_i64(out, b.singular_values.size());
    put_f64(out, b.mean.data(), static_cast<std::size_t>(b.mean.size()));
    put_f64(out, b.singular_values.data(), static_cast<std::size_t>(b.singular_values.size()));
    put_matrix(out, b.modes);
}

PodBasis read_pod(std::istream& in) {
    expect_line(in, kPodMagic);
    PodBasis b;
    std::uint8_t tag = 0;
    in.read(reinterpret_cast<char*>(&tag), 1);
    if (!in || tag > 1) throw FormatError("podb: bad field tag");
    b.field = tag == 0 ? SnapshotField::u : SnapshotField::iion;
    get_f64(in, &b.sigma_gen.ml, 1);
    get_f64(in, &b.sigma_gen.mt, 1);
    const Eigen::Index n = checked_dim(get_i64(in), "n");
    const Eigen::Index N = checked_dim(get_i64(in), "N");
    const Eigen::Index m = checked_dim(get_i64(in), "m");
    if (N > n) throw FormatError("podb: rank exceeds dimension");
    b.mean.resize(n);
    get_f64(in, b.mean.data(), static_cast<std::size_t>(n));
    b.singular_values.resize(m);
    get_f64(in, b.singular_values.data(), static_cast<std::size_t>(m));
    b.modes = get_matrix(in, n, N);
    return b;
}

void write_deim(std::ostream& out, const DeimOperator& d, Eigen::Index n) {
    out << kDeimMagic << '\n';
    put_i64(out, d.points());
    put_i64(out, d.projector.rows());
    put_i64(out, n);
    for (auto i : d.indices) put_i64(out, i);
    put_matrix(out, d.projector);
    put_matrix(out, d.extractor);
    put_matrix(out, d.inv_PtZ);
}

DeimOperator read_deim(std::istream& in, Eigen::Index* n_out) {
    expect_line(in, kDeimMagic);
    const Eigen::Index M = checked_dim(get_i64(in), "M");
    const Eigen::Index N = checked_dim(get_i64(in), "N");
    const Eigen::Index n = checked_dim(get_i64(in), "n");
    DeimOperator d;
    for (Eigen::Index i = 0; i < M; ++i) {
        const auto p = get_i64(in);
        if (p < 0 || p >= n) throw FormatError("deim: index out of range");
        d.indices.push_back(static_cast<Eigen::Index>(p));
    }
    d.projector = get_matrix(in, N, M);
    d.extractor = get_matrix(in, M, N);
    d.inv_PtZ = get_matrix(in, M, M);
    if (n_out) *n_out = n;
    return d;
}

void save_reduced_basis(const std::filesystem::path& path, const ReducedBasis& b, const FileMeta& meta) {
    std::ostringstream out(std::ios::binary);
    out << fmt::format("cardiored basis {} {}\n", meta.version, meta.config_hash);
    write_pod(out, b.u);
    write_pod(out, b.ion);
    write_deim(out, b.deim, b.u.size());
    write_atomic(path, out.str());
}

ReducedBasis load_reduced_basis(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open basis archive '" + path.string() + "'");
    std::string head;
    std::getline(in, head);
    if (head.rfind("cardiored basis ", 0) != 0) throw FormatError("'" + path.string() + "' is not a basis archive");
    ReducedBasis b;
    b.u = read_pod(in);
    b.ion = read_pod(in);
    Eigen::Index n = 0;
    b.deim = read_deim(in, &n);
    if (b.u.field != SnapshotField::u || b.ion.field != SnapshotField::iion)
        throw FormatError("basis archive holds fields in the wrong order");
    if (n != b.u.size() || b.ion.size() != n || b.deim.projector.rows() != b.u.rank() ||
        b.deim.points() != b.ion.rank())
        throw FormatError("basis archive sections disagree on dimensions");
    b.sigma_gen = b.u.sigma_gen;
    check_orthonormal(b.u, "u");
    check_orthonormal(b.ion, "I_ion");
    return b;
}

json measurement_to_json(const MeasurementSet& m, const FileMeta& meta) {
    m.validate();
    json sites = json::array();
    json frames = json::array();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (m.site_mask[i] == 0.0) continue;
        sites.push_back(i);
        std::vector<double> row(m.frames.cols());
        for (Eigen::Index k = 0; k < m.frames.cols(); ++k) row[static_cast<std::size_t>(k)] = m.frames(i, k);
        frames.push_back(row);
    }
    return {{"format", "cardiored measurements v1"},
            {"version", meta.version},
            {"config_hash", meta.config_hash},
            {"n", m.size()},
            {"dt", m.dt},
            {"dt_snap", m.dt_snap},
            {"sigma_exact", {m.sigma_exact.ml, m.sigma_exact.mt}},
            {"noise_level", m.noise_level},
            {"seed", m.seed},
            {"noise_model", to_string(m.noise_model)},
            {"marker_steps", m.marker_steps},
            {"sites", sites},
            {"frames", frames}};
}

MeasurementSet measurement_from_json(const json& j) {
    try {
        if (j.at("format") != "cardiored measurements v1") throw FormatError("not a measurement file");
        MeasurementSet m;
        const Eigen::Index n = j.at("n").get<Eigen::Index>();
        m.dt = j.at("dt").get<double>();
        m.dt_snap = j.at("dt_snap").get<double>();
        const auto s = j.at("sigma_exact").get<std::array<double, 2>>();
        m.sigma_exact = {s[0], s[1]};
        m.noise_level = j.at("noise_level").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.noise_model = noise_model_from_string(j.at("noise_model").get<std::string>());
        m.marker_steps = j.at("marker_steps").get<std::vector<long>>();
        const auto sites = j.at("sites").get<std::vector<Eigen::Index>>();
        const auto rows = j.at("frames").get<std::vector<std::vector<double>>>();
        if (rows.size() != sites.size()) throw FormatError("measurement sites and frames differ in length");
        const auto K = static_cast<Eigen::Index>(m.marker_steps.size());
        m.site_mask = Eigen::VectorXd::Zero(n);
        m.frames = Eigen::MatrixXd::Zero(n, K);
        for (std::size_t r = 0; r < sites.size(); ++r) {
            const auto i = sites[r];
            if (i < 0 || i >= n) throw FormatError("measurement site index out of range");
            if (static_cast<Eigen::Index>(rows[r].size()) != K) throw FormatError("measurement row has wrong length");
            m.site_mask[i] = 1.0;
            for (Eigen::Index k = 0; k < K; ++k) m.frames(i, k) = rows[r][static_cast<std::size_t>(k)];
        }
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("measurement file: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("measurement file: ") + e.what());
    }
}

void save_measurements(const std::filesystem::path& path, const MeasurementSet& m, const FileMeta& meta) {
    write_atomic(path, measurement_to_json(m, meta).dump(1) + "\n");
}

MeasurementSet load_measurements(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open measurement file '" + path.string() + "'");
    try {
        return measurement_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw FormatError("measurement file '" + path.string() + "': " + e.what());
    }
}

std::string trajectory_csv(const TrajectoryRecord& rec, const Eigen::MatrixXd& frames, const FileMeta& meta) {
    std::string out = meta_lines(meta);
    out += "step,t";
    for (Eigen::Index i = 0; i < frames.rows(); ++i) out += fmt::format(",v{}", i);
    out += '\n';
    for (Eigen::Index f = 0; f < frames.cols(); ++f) {
        const long step = rec.frame_step(f);
        out += fmt::format("{},{}", step, step * rec.dt);
        for (Eigen::Index i = 0; i < frames.rows(); ++i) out += fmt::format(",{}", frames(i, f));
        out += '\n';
    }
    return out;
}

std::string history_csv(const std::vector<IterateRecord>& history, const FileMeta& meta) {
    std::string out = meta_lines(meta) + "iter,sigma_ml,sigma_mt,J,grad_norm,basis_index,mu\n";
    for (const auto& h : history)
        out += fmt::format("{},{},{},{},{},{},{}\n", h.iter, h.sigma.ml, h.sigma.mt, h.J, h.grad_norm, h.basis_index,
                           h.mu);
    return out;
}

std::string doe_csv(const DoeMap& map, const FileMeta& meta) {
    std::string out = meta_lines(meta) +
                      fmt::format("# sigma_gen {} {}\nsigma_ml,sigma_mt,e,class\n", map.sigma_gen.ml, map.sigma_gen.mt);
    for (const auto& p : map.points)
        out += p.ok ? fmt::format("{},{},{},{}\n", p.sigma.ml, p.sigma.mt, p.e, to_string(p.cls))
                    : fmt::format("{},{},nan,failed\n", p.sigma.ml, p.sigma.mt);
    return out;
}

std::string doe_gnuplot(const DoeMap& map, const std::string& csv_name, const std::vector<double>& band_edges) {
    std::string out;
    out += "set datafile separator ','\n";
    out += "set xlabel 'sigma_ml (mS/cm)'\nset ylabel 'sigma_mt (mS/cm)'\n";
    out += "set key outside\n";
    out += "set terminal pngcairo size 800,700\n";
    out += fmt::format("set output '{}.png'\n", csv_name.substr(0, csv_name.rfind('.')));
    int k = 1;
    for (double th : band_edges)
        out += fmt::format("set arrow {} from 0,0 to 7,{} nohead dt 2 lc rgb 'red'\n", k++, 7.0 * std::tan(th));
    out += fmt::format("set label 1 at {},{} point pt 9 ps 2 lc rgb 'red'\n", map.sigma_gen.ml, map.sigma_gen.mt);
    out += fmt::format(
        "plot '{0}' using 1:(strcol(4) eq 'black' ? $2 : 1/0) skip 4 with points pt 7 lc rgb 'black' title 'e <= 0.002', \\\n"
        "     '{0}' using 1:(strcol(4) eq 'cyan' ? $2 : 1/0) skip 4 with points pt 7 lc rgb 'cyan' title '0.002 < e <= 0.005', \\\n"
        "     '{0}' using 1:(strcol(4) eq 'white' ? $2 : 1/0) skip 4 with points pt 6 lc rgb 'gray' title 'e > 0.005'\n",
        csv_name);
    return out;
}

}  // namespace cardiored
