#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dcqa {

// One finite-difference probe: a named sub-graph and the worst relative error
// over every parameter element feeding it.
struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int64_t n_elements = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst = 0.0;

    bool passed(double tol) const { return worst <= tol; }
};

// Central-difference validation of the backward pass. Covers each primitive in
// isolation and one composed path through the full model (embedding, encoder,
// coattention stack, span head, loss) with every trainable leaf probed.
GradCheckReport run_grad_checks(uint64_t seed, double epsilon);

}  // namespace dcqa
