#include "thermoscope/dataset.hpp"

#include <cmath>
#include <sstream>

namespace thermoscope {

Dataset::Dataset(int dim, std::vector<HermitianOperator> observables, std::vector<std::string> names,
                 DensityMatrix reference, std::vector<Sample> samples,
                 std::map<std::string, std::string> metadata)
    : dim_(dim),
      observables_(std::move(observables)),
      names_(std::move(names)),
      reference_(std::move(reference)),
      samples_(std::move(samples)),
      metadata_(std::move(metadata)) {
    if (dim_ < 2) throw ValidationError("Dataset: dimension must be >= 2");
    if (observables_.empty()) throw ValidationError("Dataset: at least one observable required");
    if (static_cast<int>(observables_.size()) > dim_ * dim_ - 1) {
        std::ostringstream os;
        os << "Dataset: " << observables_.size() << " observables exceed the d^2 - 1 = "
           << dim_ * dim_ - 1 << " independent traceless directions";
        throw ValidationError(os.str());
    }
    if (names_.size() != observables_.size()) {
        throw ValidationError("Dataset: one name per observable required");
    }
    for (std::size_t b = 0; b < observables_.size(); ++b) {
        if (observables_[b].dim() != dim_) {
            std::ostringstream os;
            os << "Dataset: observables[" << b << "] has dimension " << observables_[b].dim()
               << ", expected " << dim_;
            throw DimMismatch(os.str());
        }
    }
    if (reference_.dim() != dim_) throw DimMismatch("Dataset: reference state dimension mismatch");
    const double cond = gram_condition(observables_);
    if (cond > kGramConditionMax) {
        std::ostringstream os;
        os << "Dataset: observables together with the unit operator are not linearly independent"
           << " (Gram condition " << cond << ")";
        throw ValidationError(os.str());
    }
    if (samples_.empty()) throw ValidationError("Dataset: no samples");
    weights_.resize(samples_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const Sample& s = samples_[i];
        if (s.size < 1) {
            std::ostringstream os;
            os << "Dataset: samples[" << i << "].size must be >= 1";
            throw ValidationError(os.str());
        }
        if (s.means.size() != static_cast<Eigen::Index>(observables_.size())) {
            std::ostringstream os;
            os << "Dataset: samples[" << i << "].means has " << s.means.size() << " entries, expected "
               << observables_.size();
            throw ValidationError(os.str());
        }
        total_size_ += static_cast<double>(s.size);
        log_size_sum_ += std::log(static_cast<double>(s.size));
    }
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        weights_[i] = static_cast<double>(samples_[i].size) / total_size_;
    }
    uniform_reference_ = is_uniform(reference_);
}

const std::vector<DensityMatrix>& Dataset::images() const {
    if (images_.empty()) {
        images_.reserve(samples_.size());
        for (const Sample& s : samples_) {
            images_.push_back(tomographic_image(s.means, observables_, reference_));
        }
    }
    return images_;
}

const DensityMatrix& Dataset::mean_image() const {
    if (mean_image_.empty()) {
        const auto& imgs = images();
        const int d = dim_;
        CMatrix mix = CMatrix::Zero(d, d);
        for (std::size_t i = 0; i < imgs.size(); ++i) mix += weights_[i] * imgs[i].matrix();
        mean_image_.push_back(DensityMatrix(mix));
    }
    return mean_image_.front();
}

RVector Dataset::mean_values() const {
    RVector f = RVector::Zero(m());
    for (std::size_t i = 0; i < samples_.size(); ++i) f += weights_[i] * samples_[i].means;
    return f;
}

}  // namespace thermoscope
