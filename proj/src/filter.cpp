#include "expfbf/filter.hpp"

#include <bit>
#include <fstream>

#include "expfbf/errors.hpp"
#include "expfbf/numerics.hpp"
#include "expfbf/rng.hpp"

namespace expfbf::filter {

namespace {

void symmetrize(Matrix& m) { m = (0.5 * (m + m.transpose())).eval(); }

void validate_config(const FilterConfig& c) {
    if (c.n_x < 1 || c.n_y < 1) throw InvalidInputError("filter needs n_x >= 1 and n_y >= 1");
    if (c.sigma_s <= 0.0 || c.sigma_y <= 0.0 || c.p4_init <= 0.0)
        throw InvalidInputError("filter variances must be positive");
    if (c.sigma_omega < 0.0) throw InvalidInputError("weight noise std must be nonnegative");
    if (c.kappa1 <= 0.0 || c.kappa1 > 1.0 || c.kappa2 < 0.0 || c.kappa2 > 1.0)
        throw InvalidInputError("gain scales must lie in (0, 1]");
    if (c.phi.has_value() != (c.n_u > 0))
        throw InvalidInputError("input map present iff n_u > 0");
    if (c.phi && c.phi->dim() != c.n_u)
        throw InvalidInputError("input map dimension does not match n_u");
}

// Fills in dimensions and allocates zeroed storage; the caller populates
// state, weights, and covariance contents.
FilterModel make_shell(const FilterConfig& config) {
    validate_config(config);
    FilterModel m;
    m.config = config;
    switch (config.mode) {
        case StateMode::input_state:
            m.n_s = config.n_x + config.n_y;
            if (config.psi.dim() > m.n_s)
                throw InvalidInputError("state map dimension exceeds augmented state size");
            m.d_a = config.psi.feature_dim();
            break;
        case StateMode::feature_state:
            m.n_s = config.psi.feature_dim();
            m.d_a = m.n_s;
            break;
        case StateMode::concat:
            if (config.psi.dim() != config.n_x)
                throw InvalidInputError("concat mode needs a state map over n_x coordinates");
            m.n_s = config.n_x + config.psi.feature_dim();
            m.d_a = m.n_s;
            break;
    }
    m.d_b = config.phi ? config.phi->feature_dim() : 0;
    m.d_zeta = m.d_a + m.d_b;
    m.n_omega = m.n_s * m.d_zeta;

    int meas_begin = config.meas_begin;
    if (meas_begin < 0)
        meas_begin = config.mode == StateMode::concat ? 0 : m.n_s - config.n_y;
    if (meas_begin + config.n_y > m.n_s)
        throw InvalidInputError("measurement range exceeds state bounds");
    m.config.meas_begin = meas_begin;

    if (config.layout == CovarianceLayout::full) {
        const auto entries = static_cast<std::uint64_t>(m.n_omega) *
                             static_cast<std::uint64_t>(m.n_omega);
        if (entries > 100000000ull)
            throw CapacityError("full weight covariance needs " + std::to_string(entries) +
                                " entries; use the per-state-block layout");
        m.p4 = Matrix::Zero(m.n_omega, m.n_omega);
    } else {
        m.p4_blocks.assign(m.n_s, Matrix::Zero(m.d_zeta, m.d_zeta));
    }
    m.s = Vector::Zero(m.n_s);
    m.a = Matrix::Zero(m.n_s, m.d_a);
    m.b = Matrix::Zero(m.n_s, m.d_b);
    if (config.layout == CovarianceLayout::per_state_joint)
        m.p1_blocks.assign(m.n_s, Matrix::Zero(m.n_s, m.n_s));
    else
        m.p1 = Matrix::Zero(m.n_s, m.n_s);
    m.p2 = Matrix::Zero(m.n_s, m.n_omega);
    return m;
}

}  // namespace

FilterModel init_filter(const FilterConfig& config) {
    FilterModel m = make_shell(config);
    Rng rng(config.seed);
    for (Eigen::Index i = 0; i < m.s.size(); ++i) m.s[i] = rng.uniform(-0.1, 0.1);
    for (int r = 0; r < m.n_s; ++r)
        for (int c = 0; c < m.d_a; ++c) m.a(r, c) = rng.uniform(-0.1, 0.1);
    for (int r = 0; r < m.n_s; ++r)
        for (int c = 0; c < m.d_b; ++c) m.b(r, c) = rng.uniform(-0.1, 0.1);
    if (config.layout == CovarianceLayout::per_state_joint)
        m.p1_blocks.assign(m.n_s, (config.sigma_s * config.sigma_s *
                                   Matrix::Identity(m.n_s, m.n_s)).eval());
    else
        m.p1 = config.sigma_s * config.sigma_s * Matrix::Identity(m.n_s, m.n_s);
    if (config.layout == CovarianceLayout::full)
        m.p4 = config.p4_init * Matrix::Identity(m.n_omega, m.n_omega);
    else
        m.p4_blocks.assign(m.n_s,
                           (config.p4_init * Matrix::Identity(m.d_zeta, m.d_zeta)).eval());
    return m;
}

Vector regressor(const FilterModel& model, const Vector& s) {
    if (model.config.mode == StateMode::input_state)
        return model.config.psi.eval(s.head(model.config.psi.dim()));
    return s;
}

Vector joint_regressor(const FilterModel& model, const Vector& s, const Vector& u) {
    const bool has_input = model.config.phi.has_value();
    if (has_input != (u.size() > 0))
        throw InvalidInputError(has_input ? "filter input missing"
                                          : "filter has no input map but input given");
    Vector ra = regressor(model, s);
    if (!ra.allFinite())
        throw NumericFailureError("state features non-finite", model.step);
    if (!has_input) return ra;
    Vector pu = model.config.phi->eval(u);
    if (!pu.allFinite())
        throw NumericFailureError("input features non-finite", model.step);
    Vector zeta(ra.size() + pu.size());
    zeta << ra, pu;
    return zeta;
}

Vector state_transition(const FilterModel& model, const Vector& u) {
    const Vector zeta = joint_regressor(model, model.s, u);
    Vector out = model.a * zeta.head(model.d_a);
    if (model.d_b > 0) out += model.b * zeta.tail(model.d_b);
    return out;
}

Matrix jacobian_F1(const FilterModel& model) {
    if (model.config.mode != StateMode::input_state) return model.a;
    const int d_psi = model.config.psi.dim();
    Matrix f1 = Matrix::Zero(model.n_s, model.n_s);
    f1.leftCols(d_psi) = model.a * model.config.psi.jacobian(model.s.head(d_psi));
    return f1;
}

namespace {

// Structural products with F2 = blockdiag-per-state replication of zeta^T in
// the full weight ordering (row-major A entries, then row-major B entries).
Matrix f2_times(const FilterModel& m, const Vector& zeta, const Matrix& rhs) {
    Matrix out(m.n_s, rhs.cols());
    const auto ra = zeta.head(m.d_a);
    for (int k = 0; k < m.n_s; ++k) {
        out.row(k) = ra.transpose() * rhs.middleRows(k * m.d_a, m.d_a);
        if (m.d_b > 0)
            out.row(k) += zeta.tail(m.d_b).transpose() *
                          rhs.middleRows(m.n_s * m.d_a + k * m.d_b, m.d_b);
    }
    return out;
}

Matrix times_f2t(const FilterModel& m, const Vector& zeta, const Matrix& lhs) {
    Matrix out(lhs.rows(), m.n_s);
    const auto ra = zeta.head(m.d_a);
    for (int k = 0; k < m.n_s; ++k) {
        out.col(k) = lhs.middleCols(k * m.d_a, m.d_a) * ra;
        if (m.d_b > 0)
            out.col(k) += lhs.middleCols(m.n_s * m.d_a + k * m.d_b, m.d_b) * zeta.tail(m.d_b);
    }
    return out;
}

}  // namespace

Matrix weight_output_covariance(const FilterModel& model, const Vector& zeta) {
    if (model.config.layout == CovarianceLayout::full)
        return times_f2t(model, zeta, f2_times(model, zeta, model.p4));
    Matrix out = Matrix::Zero(model.n_s, model.n_s);
    for (int k = 0; k < model.n_s; ++k)
        out(k, k) = zeta.dot(model.p4_blocks[k] * zeta);
    return out;
}

PredictResult predict(FilterModel& model, const Vector& u) {
    const Vector zeta = joint_regressor(model, model.s, u);
    Vector sprior = model.a * zeta.head(model.d_a);
    if (model.d_b > 0) sprior += model.b * zeta.tail(model.d_b);
    const Matrix f1 = jacobian_F1(model);

    const double q_s = model.config.sigma_s * model.config.sigma_s;
    const double q_omega = model.config.sigma_omega * model.config.sigma_omega;

    if (model.config.layout == CovarianceLayout::full) {
        const Matrix f2p2t = f2_times(model, zeta, model.p2.transpose());
        const Matrix p2_prior = f1 * model.p2 + f2_times(model, zeta, model.p4);
        model.p1 = (f1 * model.p1 + f2p2t) * f1.transpose() +
                   times_f2t(model, zeta, p2_prior) +
                   q_s * Matrix::Identity(model.n_s, model.n_s);
        model.p2 = p2_prior;
        if (q_omega > 0.0)
            model.p4.diagonal().array() += q_omega;
    } else if (model.config.layout == CovarianceLayout::per_state_block) {
        Matrix f2p2t(model.n_s, model.n_s);
        Matrix p2f2t(model.n_s, model.n_s);
        Matrix p2_prior(model.n_s, model.n_omega);
        for (int k = 0; k < model.n_s; ++k) {
            const auto block = model.p2.middleCols(k * model.d_zeta, model.d_zeta);
            f2p2t.row(k) = (block * zeta).transpose();
            Matrix prior_block = f1 * block;
            prior_block.row(k) += (model.p4_blocks[k] * zeta).transpose();
            p2f2t.col(k) = prior_block * zeta;
            p2_prior.middleCols(k * model.d_zeta, model.d_zeta) = prior_block;
        }
        model.p1 = (f1 * model.p1 + f2p2t) * f1.transpose() + p2f2t +
                   q_s * Matrix::Identity(model.n_s, model.n_s);
        model.p2 = p2_prior;
        if (q_omega > 0.0)
            for (auto& block : model.p4_blocks) block.diagonal().array() += q_omega;
    } else {
        // Each state coordinate k carries an exact joint covariance over
        // (s, row k of the weights); its transition is [[F1, e_k zeta^T],
        // [0, I]], so the zeta terms touch only row and column k.
        for (int k = 0; k < model.n_s; ++k) {
            auto block = model.p2.middleCols(k * model.d_zeta, model.d_zeta);
            Matrix cross = f1 * block;
            const Vector c = model.p4_blocks[k] * zeta;
            const Vector tz = cross * zeta;
            Matrix p1k = f1 * model.p1_blocks[k] * f1.transpose();
            p1k.row(k) += tz.transpose();
            p1k.col(k) += tz;
            p1k(k, k) += zeta.dot(c);
            p1k.diagonal().array() += q_s;
            symmetrize(p1k);
            model.p1_blocks[k] = std::move(p1k);
            cross.row(k) += c.transpose();
            block = cross;
            if (q_omega > 0.0) model.p4_blocks[k].diagonal().array() += q_omega;
        }
    }
    bool cov_finite = true;
    if (model.config.layout == CovarianceLayout::per_state_joint) {
        for (const auto& blk : model.p1_blocks) cov_finite = cov_finite && blk.allFinite();
    } else {
        symmetrize(model.p1);
        cov_finite = model.p1.allFinite();
    }
    if (!sprior.allFinite() || !cov_finite)
        throw NumericFailureError("prediction produced non-finite values", model.step);
    model.s = sprior;
    return {f1, zeta};
}

StepReport update(FilterModel& model, const Vector& d, const Vector* clean_reference) {
    const int n_y = model.config.n_y;
    const int sel = model.config.meas_begin;
    if (d.size() != n_y) throw InvalidInputError("measurement dimension mismatch");

    StepReport report;
    report.prior_state = model.s;
    report.prior_output = model.s.segment(sel, n_y);
    report.innovation = d - report.prior_output;

    const double r_y = model.config.sigma_y * model.config.sigma_y;
    if (model.config.layout == CovarianceLayout::per_state_joint) {
        // Every sub-filter forms its own gain from its own joint covariance;
        // coordinate k of the state takes its correction from sub-filter k.
        Vector mixed = Vector::Zero(model.n_s);
        for (int k = 0; k < model.n_s; ++k) {
            Matrix& p1k = model.p1_blocks[k];
            const Matrix l1k = p1k.middleCols(sel, n_y);
            Matrix innovation_cov = p1k.block(sel, sel, n_y, n_y);
            innovation_cov.diagonal().array() += r_y;
            Matrix n_inv;
            try {
                n_inv = numerics::spd_solve(innovation_cov, Matrix::Identity(n_y, n_y));
            } catch (const NumericFailureError&) {
                throw NumericFailureError("innovation covariance not positive definite",
                                          model.step);
            }
            const Matrix k1k = l1k * n_inv;
            mixed[k] = k1k.row(k).dot(report.innovation);
            auto block = model.p2.middleCols(k * model.d_zeta, model.d_zeta);
            const Matrix l2k = block.middleRows(sel, n_y).transpose();
            const Matrix k2k = l2k * n_inv;
            const Vector delta = model.config.kappa2 * (k2k * report.innovation);
            model.a.row(k) += delta.head(model.d_a).transpose();
            if (model.d_b > 0) model.b.row(k) += delta.tail(model.d_b).transpose();
            p1k -= k1k * l1k.transpose();
            symmetrize(p1k);
            block -= k1k * l2k.transpose();
            model.p4_blocks[k] -= k2k * l2k.transpose();
            symmetrize(model.p4_blocks[k]);
        }
        model.s += model.config.kappa1 * mixed;
    } else {
        const Matrix l1 = model.p1.middleCols(sel, n_y);
        Matrix innovation_cov = model.p1.block(sel, sel, n_y, n_y);
        innovation_cov.diagonal().array() += r_y;
        Matrix n_inv;
        try {
            n_inv = numerics::spd_solve(innovation_cov, Matrix::Identity(n_y, n_y));
        } catch (const NumericFailureError&) {
            throw NumericFailureError("innovation covariance not positive definite", model.step);
        }

        const Matrix k1 = l1 * n_inv;  // unscaled; the gain scales apply to updates only
        model.s += model.config.kappa1 * (k1 * report.innovation);

        if (model.config.layout == CovarianceLayout::full) {
            const Matrix l2 = model.p2.middleRows(sel, n_y).transpose();
            const Matrix k2 = l2 * n_inv;
            const Vector delta = model.config.kappa2 * (k2 * report.innovation);
            using RowMajorMap =
                Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>>;
            model.a += RowMajorMap(delta.data(), model.n_s, model.d_a);
            if (model.d_b > 0)
                model.b +=
                    RowMajorMap(delta.data() + model.n_s * model.d_a, model.n_s, model.d_b);
            model.p1 -= k1 * l1.transpose();
            model.p2 -= k1 * l2.transpose();
            model.p4 -= k2 * l2.transpose();
            symmetrize(model.p4);
        } else {
            for (int k = 0; k < model.n_s; ++k) {
                auto block = model.p2.middleCols(k * model.d_zeta, model.d_zeta);
                const Matrix l2k = block.middleRows(sel, n_y).transpose();
                const Matrix k2k = l2k * n_inv;
                const Vector delta = model.config.kappa2 * (k2k * report.innovation);
                model.a.row(k) += delta.head(model.d_a).transpose();
                if (model.d_b > 0) model.b.row(k) += delta.tail(model.d_b).transpose();
                block -= k1 * l2k.transpose();
                model.p4_blocks[k] -= k2k * l2k.transpose();
                symmetrize(model.p4_blocks[k]);
            }
            model.p1 -= k1 * l1.transpose();
        }
        symmetrize(model.p1);
    }

    if (model.config.mode == StateMode::concat && model.config.relift) {
        const int n_x = model.config.n_x;
        model.s.tail(model.n_s - n_x) = model.config.psi.eval(model.s.head(n_x));
    }

    report.posterior_state = model.s;
    report.posterior_output = model.s.segment(sel, n_y);
    if (clean_reference) {
        if (clean_reference->size() != n_y)
            throw InvalidInputError("clean reference dimension mismatch");
        report.prior_sq_err = (report.prior_output - *clean_reference).squaredNorm();
        report.posterior_sq_err = (report.posterior_output - *clean_reference).squaredNorm();
    }
    ++model.step;
    return report;
}

std::vector<StepReport> run_sequence(FilterModel& model, const std::vector<Vector>& inputs,
                                     const std::vector<Vector>& measurements,
                                     const std::vector<Vector>* clean) {
    if (!inputs.empty() && inputs.size() != measurements.size())
        throw InvalidInputError("input and measurement sequences differ in length");
    if (clean && clean->size() != measurements.size())
        throw InvalidInputError("clean reference sequence length mismatch");
    std::vector<StepReport> reports;
    reports.reserve(measurements.size());
    const Vector no_input;
    for (std::size_t i = 0; i < measurements.size(); ++i) {
        predict(model, inputs.empty() ? no_input : inputs[i]);
        reports.push_back(
            update(model, measurements[i], clean ? &(*clean)[i] : nullptr));
    }
    return reports;
}

CovarianceHealth covariance_health(const FilterModel& model) {
    CovarianceHealth h;
    if (model.config.layout == CovarianceLayout::per_state_joint) {
        h.p1_min_eigenvalue = std::numeric_limits<double>::infinity();
        for (const auto& block : model.p1_blocks) {
            h.p1_asymmetry = std::max(
                h.p1_asymmetry, (block - block.transpose()).cwiseAbs().maxCoeff());
            Eigen::SelfAdjointEigenSolver<Matrix> es(block, Eigen::EigenvaluesOnly);
            h.p1_min_eigenvalue = std::min(h.p1_min_eigenvalue, es.eigenvalues().minCoeff());
        }
    } else {
        h.p1_asymmetry = (model.p1 - model.p1.transpose()).cwiseAbs().maxCoeff();
        Eigen::SelfAdjointEigenSolver<Matrix> es(model.p1, Eigen::EigenvaluesOnly);
        h.p1_min_eigenvalue = es.eigenvalues().minCoeff();
    }
    if (model.config.layout == CovarianceLayout::full) {
        h.p4_asymmetry = (model.p4 - model.p4.transpose()).cwiseAbs().maxCoeff();
    } else {
        for (const auto& block : model.p4_blocks)
            h.p4_asymmetry = std::max(
                h.p4_asymmetry, (block - block.transpose()).cwiseAbs().maxCoeff());
    }
    return h;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kMagic[8] = {'E', 'X', 'P', 'F', 'B', 'F', '0', '1'};

std::string mode_name(StateMode m) {
    switch (m) {
        case StateMode::input_state: return "input-state";
        case StateMode::feature_state: return "feature-state";
        case StateMode::concat: return "concat";
    }
    throw InvalidInputError("unknown state mode");
}

StateMode mode_from_name(const std::string& name) {
    if (name == "input-state") return StateMode::input_state;
    if (name == "feature-state") return StateMode::feature_state;
    if (name == "concat") return StateMode::concat;
    throw InvalidInputError("unknown state mode '" + name + "'");
}

std::string layout_name(CovarianceLayout l) {
    switch (l) {
        case CovarianceLayout::full: return "full";
        case CovarianceLayout::per_state_block: return "per-state-block";
        case CovarianceLayout::per_state_joint: return "per-state-joint";
    }
    throw InvalidInputError("unknown covariance layout");
}

CovarianceLayout layout_from_name(const std::string& name) {
    if (name == "full") return CovarianceLayout::full;
    if (name == "per-state-block") return CovarianceLayout::per_state_block;
    if (name == "per-state-joint") return CovarianceLayout::per_state_joint;
    throw InvalidInputError("unknown covariance layout '" + name + "'");
}

}  // namespace

nlohmann::json config_to_json(const FilterConfig& c) {
    nlohmann::json j;
    j["n_u"] = c.n_u;
    j["n_x"] = c.n_x;
    j["n_y"] = c.n_y;
    j["mode"] = mode_name(c.mode);
    j["psi"] = c.psi.to_json();
    j["phi"] = c.phi ? c.phi->to_json() : nlohmann::json();
    j["sigma_s"] = c.sigma_s;
    j["sigma_y"] = c.sigma_y;
    j["sigma_omega"] = c.sigma_omega;
    j["p4_init"] = c.p4_init;
    j["kappa1"] = c.kappa1;
    j["kappa2"] = c.kappa2;
    j["layout"] = layout_name(c.layout);
    j["meas_begin"] = c.meas_begin;
    j["relift"] = c.relift;
    j["seed"] = c.seed;
    return j;
}

FilterConfig config_from_json(const nlohmann::json& j) {
    FilterConfig c;
    c.n_u = j.at("n_u").get<int>();
    c.n_x = j.at("n_x").get<int>();
    c.n_y = j.at("n_y").get<int>();
    c.mode = mode_from_name(j.at("mode").get<std::string>());
    c.psi = features::FeatureMap::from_json(j.at("psi"));
    if (!j.at("phi").is_null()) c.phi = features::FeatureMap::from_json(j.at("phi"));
    c.sigma_s = j.at("sigma_s").get<double>();
    c.sigma_y = j.at("sigma_y").get<double>();
    c.sigma_omega = j.at("sigma_omega").get<double>();
    c.p4_init = j.at("p4_init").get<double>();
    c.kappa1 = j.at("kappa1").get<double>();
    c.kappa2 = j.at("kappa2").get<double>();
    c.layout = layout_from_name(j.at("layout").get<std::string>());
    c.meas_begin = j.at("meas_begin").get<int>();
    c.relift = j.at("relift").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

namespace {

void write_block(std::ofstream& out, const Matrix& m) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void read_block(std::ifstream& in, Matrix& m) {
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw InvalidInputError("checkpoint truncated while reading a block");
}

}  // namespace

void save_model(const FilterModel& model, const std::string& path) {
    nlohmann::json header;
    header["format"] = "expfbf-model";
    header["config"] = config_to_json(model.config);
    header["step"] = model.step;
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    // Blocks follow in fixed order, column-major doubles: s, A, B, P1 (one
    // matrix, or the per-state-joint blocks in state order), P2, then P4
    // (full matrix, or the per-state blocks in state order).
    write_block(out, model.s);
    write_block(out, model.a);
    write_block(out, model.b);
    if (model.config.layout == CovarianceLayout::per_state_joint) {
        for (const auto& block : model.p1_blocks) write_block(out, block);
    } else {
        write_block(out, model.p1);
    }
    write_block(out, model.p2);
    if (model.config.layout == CovarianceLayout::full) {
        write_block(out, model.p4);
    } else {
        for (const auto& block : model.p4_blocks) write_block(out, block);
    }
    if (!out) throw NumericFailureError("checkpoint write failed for '" + path + "'");
}

FilterModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInputError("cannot open '" + path + "'");
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(magic, magic + sizeof(magic), kMagic))
        throw InvalidInputError("'" + path + "' is not a filter checkpoint");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw InvalidInputError("checkpoint header truncated");
    const nlohmann::json header = nlohmann::json::parse(text);
    if (header.at("format").get<std::string>() != "expfbf-model")
        throw InvalidInputError("unexpected checkpoint format tag");

    FilterModel model = make_shell(config_from_json(header.at("config")));
    model.step = header.at("step").get<long>();
    Matrix s_block(model.n_s, 1);
    read_block(in, s_block);
    model.s = s_block.col(0);
    read_block(in, model.a);
    read_block(in, model.b);
    if (model.config.layout == CovarianceLayout::per_state_joint) {
        for (auto& block : model.p1_blocks) read_block(in, block);
    } else {
        read_block(in, model.p1);
    }
    read_block(in, model.p2);
    if (model.config.layout == CovarianceLayout::full) {
        read_block(in, model.p4);
    } else {
        for (auto& block : model.p4_blocks) read_block(in, block);
    }
    return model;
}

}  // namespace expfbf::filter
