#include "thermoscope/io.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "thermoscope/errors.hpp"

namespace thermoscope {

namespace {

Json matrix_to_json(const CMatrix& mat) {
    Json out = Json::array();
    for (int r = 0; r < mat.rows(); ++r)
        for (int c = 0; c < mat.cols(); ++c)
            out.push_back(Json::array({mat(r, c).real(), mat(r, c).imag()}));
    return out;
}

CMatrix matrix_from_json(const Json& j, int dim, const std::string& path) {
    if (!j.is_array() || static_cast<int>(j.size()) != dim * dim)
        throw ValidationError(path + ": expected a row-major array of " + std::to_string(dim * dim) +
                              " [re, im] pairs");
    CMatrix mat(dim, dim);
    int idx = 0;
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c, ++idx) {
            const Json& cell = j[static_cast<std::size_t>(idx)];
            if (!cell.is_array() || cell.size() != 2 || !cell[0].is_number() || !cell[1].is_number())
                throw ValidationError(path + "[" + std::to_string(idx) + "]: expected [re, im]");
            mat(r, c) = Complex(cell[0].get<double>(), cell[1].get<double>());
        }
    }
    return mat;
}

const Json& require(const Json& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key))
        throw ValidationError("missing field: " + (path.empty() ? std::string(key) : path + "." + key));
    return j.at(key);
}

}  // namespace

Json dataset_to_json(const Dataset& dataset) {
    Json out;
    out["dimension"] = dataset.dim();
    out["observables"] = Json::array();
    for (int b = 0; b < dataset.m(); ++b) {
        Json obs;
        obs["name"] = dataset.observable_names()[static_cast<std::size_t>(b)];
        obs["matrix"] = matrix_to_json(dataset.observables()[static_cast<std::size_t>(b)].matrix());
        out["observables"].push_back(std::move(obs));
    }
    if (dataset.uniform_reference()) {
        out["reference_state"] = "uniform";
    } else {
        out["reference_state"] = matrix_to_json(dataset.reference().matrix());
    }
    out["samples"] = Json::array();
    for (const Sample& sample : dataset.samples()) {
        Json s;
        s["size"] = sample.size;
        s["means"] = Json::array();
        for (int b = 0; b < sample.means.size(); ++b) s["means"].push_back(sample.means[b]);
        out["samples"].push_back(std::move(s));
    }
    if (!dataset.metadata().empty()) {
        Json meta;
        for (const auto& [key, value] : dataset.metadata()) meta[key] = value;
        out["metadata"] = std::move(meta);
    }
    return out;
}

Dataset dataset_from_json(const Json& j) {
    const Json& jdim = require(j, "dimension", "");
    if (!jdim.is_number_integer() || jdim.get<int>() < 2)
        throw ValidationError("dimension: expected an integer >= 2");
    const int dim = jdim.get<int>();

    const Json& jobs = require(j, "observables", "");
    if (!jobs.is_array() || jobs.empty()) throw ValidationError("observables: expected a nonempty array");
    std::vector<HermitianOperator> observables;
    std::vector<std::string> names;
    for (std::size_t b = 0; b < jobs.size(); ++b) {
        const std::string path = "observables[" + std::to_string(b) + "]";
        const Json& entry = jobs[b];
        const Json& jname = require(entry, "name", path);
        if (!jname.is_string()) throw ValidationError(path + ".name: expected a string");
        names.push_back(jname.get<std::string>());
        const CMatrix mat = matrix_from_json(require(entry, "matrix", path), dim, path + ".matrix");
        if (!mat.isApprox(mat.adjoint(), 1e-8)) throw ValidationError(path + ".matrix: not Hermitian");
        observables.emplace_back(mat);
    }

    const Json& jref = require(j, "reference_state", "");
    DensityMatrix reference = DensityMatrix::uniform(dim);
    if (jref.is_string()) {
        if (jref.get<std::string>() != "uniform")
            throw ValidationError("reference_state: expected \"uniform\" or a matrix");
    } else {
        try {
            reference = DensityMatrix(matrix_from_json(jref, dim, "reference_state"));
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("reference_state: ") + e.what());
        }
    }

    const Json& jsamples = require(j, "samples", "");
    if (!jsamples.is_array() || jsamples.empty()) throw ValidationError("samples: expected a nonempty array");
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < jsamples.size(); ++i) {
        const std::string path = "samples[" + std::to_string(i) + "]";
        const Json& entry = jsamples[i];
        Sample sample;
        const Json& jsize = require(entry, "size", path);
        if (!jsize.is_number_integer() || jsize.get<std::int64_t>() < 1)
            throw ValidationError(path + ".size: expected an integer >= 1");
        sample.size = jsize.get<std::int64_t>();
        const Json& jmeans = require(entry, "means", path);
        if (!jmeans.is_array() || jmeans.size() != names.size())
            throw ValidationError(path + ".means: expected one value per observable");
        sample.means = RVector(static_cast<int>(names.size()));
        for (std::size_t b = 0; b < jmeans.size(); ++b) {
            if (!jmeans[b].is_number())
                throw ValidationError(path + ".means[" + std::to_string(b) + "]: expected a number");
            sample.means[static_cast<int>(b)] = jmeans[b].get<double>();
        }
        samples.push_back(std::move(sample));
    }

    std::map<std::string, std::string> metadata;
    if (j.contains("metadata")) {
        const Json& jmeta = j.at("metadata");
        if (!jmeta.is_object()) throw ValidationError("metadata: expected an object");
        for (const auto& [key, value] : jmeta.items()) {
            if (!value.is_string()) throw ValidationError("metadata." + key + ": expected a string");
            metadata[key] = value.get<std::string>();
        }
    }

    try {
        return Dataset(dim, std::move(observables), std::move(names), std::move(reference),
                       std::move(samples), std::move(metadata));
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("dataset: ") + e.what());
    }
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= static_cast<std::uint64_t>(c);
        hash *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << hash;
    return out.str();
}

std::string dataset_digest(const Dataset& dataset) {
    return fnv1a_hex(dataset_to_json(dataset).dump());
}

namespace {

Json score_to_json(const ModelScore& score) {
    Json out;
    out["label"] = score.level.label();
    out["p"] = score.p;
    out["log_likelihood"] = score.log_likelihood;
    out["full_log_likelihood"] =
        score.full_log_likelihood ? Json(*score.full_log_likelihood) : Json(nullptr);
    out["alpha"] = score.alpha ? Json(*score.alpha) : Json(nullptr);
    out["alpha_curvature"] = score.alpha_curvature;
    out["alpha_low_curvature"] = score.alpha_low_curvature;
    out["misfit"] = score.misfit;
    out["reference_entropy"] = score.reference_entropy;
    Json entropies = Json::array();
    for (int i = 0; i < score.per_sample_entropies.size(); ++i)
        entropies.push_back(score.per_sample_entropies[i]);
    out["per_sample_entropies"] = std::move(entropies);
    return out;
}

Json vector_to_json(const RVector& v) {
    Json out = Json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Json thermal_to_json(const ThermalCheck& thermal) {
    Json out;
    out["pass"] = thermal.pass;
    out["lhs"] = thermal.lhs;
    out["rhs"] = thermal.rhs;
    out["margin"] = thermal.margin;
    out["margin_factor"] = thermal.margin_factor;
    return out;
}

Json qubit_thermal_to_json(const QubitThermal& margins) {
    Json out;
    out["pass"] = margins.pass;
    out["margin_spread"] = margins.margin_spread;
    out["margin_angle"] = margins.margin_angle;
    out["margin_factor"] = margins.margin_factor;
    return out;
}

Json hamiltonian_to_json(const HamiltonianEstimate& est) {
    Json out;
    out["xi"] = vector_to_json(est.xi);
    out["beta_bar"] = est.beta_bar;
    out["per_sample_beta"] = est.per_sample_beta;
    out["internal_energies"] = est.internal_energies;
    out["mean_internal_energy"] = est.mean_internal_energy;
    out["max_log_likelihood"] = est.max_log_likelihood;
    out["condition_residual"] = est.condition_residual;
    out["effective"] = est.effective;
    out["thermal"] = est.thermal ? thermal_to_json(*est.thermal) : Json(nullptr);
    out["qubit_thermal"] = est.qubit ? qubit_thermal_to_json(*est.qubit) : Json(nullptr);
    out["warnings"] = est.warnings;
    return out;
}

}  // namespace

Json report_to_json(const AssessmentReport& report, const Dataset& dataset) {
    Json out;
    out["dataset_digest"] = report.dataset_digest;
    Json regime;
    regime["inside"] = report.gaussian_regime.inside;
    regime["max_pairwise_entropy"] = report.gaussian_regime.max_pairwise_entropy;
    regime["max_center_entropy"] = report.gaussian_regime.max_center_entropy;
    out["gaussian_regime"] = std::move(regime);
    Json scores = Json::array();
    for (const ModelScore& score : report.scores) scores.push_back(score_to_json(score));
    out["scores"] = std::move(scores);
    out["pca_eigenvalues"] = vector_to_json(report.pca_eigenvalues);
    Json winner;
    winner["label"] = report.winner_label;
    winner["p"] = report.winner_p;
    out["winner"] = std::move(winner);
    Json comparisons = Json::array();
    for (const LevelComparison& cmp : report.comparisons) {
        Json entry;
        entry["simple"] = cmp.simple_label;
        entry["detailed"] = cmp.detailed_label;
        entry["delta_log_likelihood"] = cmp.delta_log_likelihood;
        comparisons.push_back(std::move(entry));
    }
    out["comparisons"] = std::move(comparisons);
    out["hamiltonian"] = report.hamiltonian ? hamiltonian_to_json(*report.hamiltonian) : Json(nullptr);
    out["qubit_margins"] =
        report.qubit_margins ? qubit_thermal_to_json(*report.qubit_margins) : Json(nullptr);
    out["verdict"] = report.verdict;
    out["margin_factor"] = report.margin_factor;
    out["warnings"] = report.warnings;
    Json meta;
    for (const auto& [key, value] : dataset.metadata()) meta[key] = value;
    out["dataset_metadata"] = std::move(meta);
    return out;
}

Json estimate_to_json(const HamiltonianEstimate& estimate, const std::string& digest) {
    Json out;
    out["dataset_digest"] = digest;
    out["estimate"] = hamiltonian_to_json(estimate);
    return out;
}

std::vector<LevelOfDescription> levels_from_json(const Json& j, const Dataset& dataset) {
    const Json& jlevels = require(j, "levels", "");
    if (!jlevels.is_array() || jlevels.empty())
        throw ValidationError("levels: expected a nonempty array");
    std::vector<LevelOfDescription> out;
    for (std::size_t k = 0; k < jlevels.size(); ++k) {
        const std::string path = "levels[" + std::to_string(k) + "]";
        const Json& entry = jlevels[k];
        const Json& jlabel = require(entry, "label", path);
        if (!jlabel.is_string()) throw ValidationError(path + ".label: expected a string");
        const std::string label = jlabel.get<std::string>();
        const Json& jops = require(entry, "observables", path);
        if (!jops.is_array()) throw ValidationError(path + ".observables: expected an array");
        if (jops.empty()) {
            out.push_back(LevelOfDescription::empty(dataset.dim(), label));
            continue;
        }
        std::vector<HermitianOperator> ops;
        for (std::size_t a = 0; a < jops.size(); ++a) {
            const std::string opath = path + ".observables[" + std::to_string(a) + "]";
            const Json& op = jops[a];
            if (op.is_object() && op.contains("matrix")) {
                ops.emplace_back(matrix_from_json(op.at("matrix"), dataset.dim(), opath + ".matrix"));
            } else if (op.is_object() && op.contains("coefficients")) {
                const Json& jcoef = op.at("coefficients");
                if (!jcoef.is_array() || static_cast<int>(jcoef.size()) != dataset.m())
                    throw ValidationError(opath + ".coefficients: expected one value per dataset observable");
                CMatrix acc = CMatrix::Zero(dataset.dim(), dataset.dim());
                for (std::size_t b = 0; b < jcoef.size(); ++b) {
                    if (!jcoef[b].is_number())
                        throw ValidationError(opath + ".coefficients[" + std::to_string(b) +
                                              "]: expected a number");
                    acc += jcoef[b].get<double>() * dataset.observables()[b].matrix();
                }
                ops.emplace_back(acc);
            } else if (op.is_object() && op.contains("name")) {
                const std::string name = op.at("name").get<std::string>();
                const auto& names = dataset.observable_names();
                const auto it = std::find(names.begin(), names.end(), name);
                if (it == names.end())
                    throw ValidationError(opath + ".name: no dataset observable named " + name);
                ops.push_back(dataset.observables()[static_cast<std::size_t>(it - names.begin())]);
            } else {
                throw ValidationError(opath + ": expected name, matrix, or coefficients");
            }
        }
        out.emplace_back(std::move(ops), label);
    }
    return out;
}

SimulationConfig config_from_json(const Json& j) {
    SimulationConfig cfg;
    const Json& jdim = require(j, "dimension", "");
    if (!jdim.is_number_integer() || jdim.get<int>() < 2)
        throw ValidationError("dimension: expected an integer >= 2");
    cfg.dim = jdim.get<int>();

    const Json& jobs = require(j, "observables", "");
    if (!jobs.is_array() || jobs.empty()) throw ValidationError("observables: expected a nonempty array");
    for (std::size_t b = 0; b < jobs.size(); ++b) {
        const std::string path = "observables[" + std::to_string(b) + "]";
        cfg.names.push_back(require(jobs[b], "name", path).get<std::string>());
        cfg.observables.emplace_back(
            matrix_from_json(require(jobs[b], "matrix", path), cfg.dim, path + ".matrix"));
    }

    if (j.contains("reference_state") && !j.at("reference_state").is_string())
        cfg.reference = DensityMatrix(matrix_from_json(j.at("reference_state"), cfg.dim, "reference_state"));

    const Json& jtruth = require(j, "truth", "");
    if (jtruth.contains("xi")) {
        const Json& jxi = jtruth.at("xi");
        if (!jxi.is_array() || jxi.size() != cfg.observables.size())
            throw ValidationError("truth.xi: expected one coefficient per observable");
        cfg.xi_true = RVector(static_cast<int>(jxi.size()));
        for (std::size_t b = 0; b < jxi.size(); ++b) cfg.xi_true[static_cast<int>(b)] = jxi[b].get<double>();
        const Json& jbetas = require(jtruth, "betas", "truth");
        if (!jbetas.is_array() || jbetas.empty()) throw ValidationError("truth.betas: expected a nonempty array");
        for (const Json& beta : jbetas) cfg.betas.push_back(beta.get<double>());
        cfg.true_p = 1;
    } else if (jtruth.contains("states")) {
        const Json& jstates = jtruth.at("states");
        if (!jstates.is_array() || jstates.empty())
            throw ValidationError("truth.states: expected a nonempty array");
        for (std::size_t i = 0; i < jstates.size(); ++i)
            cfg.states.emplace_back(
                matrix_from_json(jstates[i], cfg.dim, "truth.states[" + std::to_string(i) + "]"));
    } else {
        throw ValidationError("truth: expected xi+betas or states");
    }

    const Json& jsizes = require(j, "sizes", "");
    if (!jsizes.is_array() || jsizes.empty()) throw ValidationError("sizes: expected a nonempty array");
    for (const Json& n : jsizes) {
        if (!n.is_number_integer() || n.get<std::int64_t>() < 1)
            throw ValidationError("sizes: entries must be integers >= 1");
        cfg.sizes.push_back(n.get<std::int64_t>());
    }

    if (j.contains("noise_model")) cfg.noise_model = j.at("noise_model").get<std::string>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("true_p")) cfg.true_p = j.at("true_p").get<int>();
    return cfg;
}

std::string plot_csv(const Dataset& dataset, const LevelOfDescription& level) {
    std::ostringstream out;
    out.precision(17);
    out << "sample,size";
    for (const std::string& name : dataset.observable_names()) out << ',' << name << "_mean";
    for (const std::string& name : dataset.observable_names()) out << ',' << name << "_proj";
    for (const std::string& name : dataset.observable_names()) out << ',' << name << "_resid";
    out << '\n';
    const std::vector<DensityMatrix>& images = dataset.images();
    for (int i = 0; i < dataset.samples_count(); ++i) {
        const DensityMatrix projection =
            project(images[static_cast<std::size_t>(i)], level, dataset.reference()).state;
        RVector proj(dataset.m());
        for (int b = 0; b < dataset.m(); ++b)
            proj[b] = expectation(dataset.observables()[static_cast<std::size_t>(b)], projection);
        const RVector& means = dataset.samples()[static_cast<std::size_t>(i)].means;
        out << i << ',' << dataset.samples()[static_cast<std::size_t>(i)].size;
        for (int b = 0; b < dataset.m(); ++b) out << ',' << means[b];
        for (int b = 0; b < dataset.m(); ++b) out << ',' << proj[b];
        for (int b = 0; b < dataset.m(); ++b) out << ',' << means[b] - proj[b];
        out << '\n';
    }
    return out.str();
}

Json load_json(const std::string& path) {
    try {
        if (path == "-") return Json::parse(std::cin);
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot open input file: " + path);
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("invalid JSON: ") + e.what());
    }
}

void save_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file: " + path);
    out << text;
}

}  // namespace thermoscope
