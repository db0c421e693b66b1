// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace genb::plot {

struct Bar {
  std::string label;
  double value = 0.0;
  double error = 0.0;  // half-height of the error bar; 0 draws none
};

/// Standalone SVG bar chart with values in [0, y_max].
std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars,
                          double y_max = 1.0);

}  // namespace genb::plot
