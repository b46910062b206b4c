#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace asymgan {

using ScalarFunction = std::function<torch::Tensor(const std::vector<torch::Tensor>&)>;

/// Compares autograd gradients of `f` with central finite differences, one input at a time.
/// Returns the largest relative error ||g_auto - g_fd|| / max(||g_auto||, ||g_fd||, 1e-12)
/// over the floating-point inputs. Inputs should be double precision.
double gradient_relative_error(const ScalarFunction& f, const std::vector<torch::Tensor>& inputs, double step = 1e-3);

struct GradcheckResult {
  std::string loss;
  double relative_error = 0.0;
  bool passed = false;
};

/// Finite-difference check of every loss operation on 1x3x8x8 double inputs.
std::vector<GradcheckResult> run_loss_gradchecks(std::uint64_t seed = 0, double tolerance = 1e-3);

}  // namespace asymgan
