#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ckmr/summaries.hpp"

namespace ckmr {

// Minimal static SVG renderings, one self-contained file each, no external
// assets.  Meant for a quick look at a run, not publication figures.

// One panel per index: 95% band, posterior-mean line, zero axis.
void write_curves_svg(const std::string& path, const std::vector<CurveGrid>& curves,
                      const std::vector<std::string>& group_names);

// M x M heat table, diagonal = main inclusion, off-diagonal = joint kernel
// pair inclusion.
void write_pip_heat_svg(const std::string& path, const Eigen::VectorXd& main_pip,
                        const Eigen::MatrixXd& joint_pip,
                        const std::vector<std::string>& group_names);

}  // namespace ckmr
