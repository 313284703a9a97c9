#ifndef THERMOSCOPE_DATASET_HPP
#define THERMOSCOPE_DATASET_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "thermoscope/gibbs.hpp"
#include "thermoscope/operators.hpp"

namespace thermoscope {

struct Sample {
    std::int64_t size = 0;  // N_i, number of system copies consumed
    RVector means;          // f^i_b, one entry per dataset observable
};

// Output-side tomography data: R samples, each reduced to the measured mean
// values of the m dataset observables, plus the reference state the priors
// are anchored to.
class Dataset {
public:
    Dataset(int dim, std::vector<HermitianOperator> observables, std::vector<std::string> names,
            DensityMatrix reference, std::vector<Sample> samples,
            std::map<std::string, std::string> metadata = {});

    int dim() const { return dim_; }
    int m() const { return static_cast<int>(observables_.size()); }
    int samples_count() const { return static_cast<int>(samples_.size()); }

    const std::vector<HermitianOperator>& observables() const { return observables_; }
    const std::vector<std::string>& observable_names() const { return names_; }
    const DensityMatrix& reference() const { return reference_; }
    bool uniform_reference() const { return uniform_reference_; }
    const std::vector<Sample>& samples() const { return samples_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

    double total_size() const { return total_size_; }       // N
    double log_size_sum() const { return log_size_sum_; }   // Lambda = sum ln N_i
    const RVector& weights() const { return weights_; }     // w_i = N_i / N

    // mu_i for every sample (computed once, cached).
    const std::vector<DensityMatrix>& images() const;
    // mu-bar: mixture of the images with weights w_i.
    const DensityMatrix& mean_image() const;

    // f-bar_b = sum_i w_i f^i_b.
    RVector mean_values() const;

private:
    int dim_;
    std::vector<HermitianOperator> observables_;
    std::vector<std::string> names_;
    DensityMatrix reference_;
    bool uniform_reference_;
    std::vector<Sample> samples_;
    std::map<std::string, std::string> metadata_;
    double total_size_ = 0.0;
    double log_size_sum_ = 0.0;
    RVector weights_;
    mutable std::vector<DensityMatrix> images_;
    mutable std::vector<DensityMatrix> mean_image_;
};

}  // namespace thermoscope

#endif
