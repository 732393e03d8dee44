#pragma once

#include <span>
#include <string>

#include <json.hpp>

#include "derain/image.hpp"

namespace derain {

/// Full-reference quality of one image against a reference.
struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double l1 = 0.0;
};

void to_json(nlohmann::json& j, const MetricReport& r);

namespace metrics {

inline constexpr double kPsnrCap = 100.0;
inline constexpr double kPsnrCapMse = 1e-10;
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr double kSsimSigma = 1.5;
inline constexpr int kSsimWindow = 11;
inline constexpr double kDefaultMu = 0.1;

double mse(const Image& a, const Image& b);
double l1(const Image& a, const Image& b);

/// 10*log10(1/mse), capped at 100 dB once mse drops below 1e-10.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse);

/// Mean SSIM over channels and valid 11x11 Gaussian windows (sigma 1.5), L = 1.
double ssim(const Image& a, const Image& b);

/// SSIM together with its gradient with respect to the first argument.
struct SsimWithGrad {
  double value = 0.0;
  Image grad;
};
SsimWithGrad ssim_with_grad(const Image& a, const Image& b);

/// mean|out - gt| + mu * (1 - ssim(out, gt)).
double recon_loss(const Image& out, const Image& gt, double mu = kDefaultMu);

struct LossWithGrad {
  double value = 0.0;
  Image grad;
};
/// recon_loss and d(loss)/d(out). The L1 subgradient at a zero residual is taken as 0.
LossWithGrad recon_loss_with_grad(const Image& out, const Image& gt, double mu = kDefaultMu);

/// -log(max(probs[target], 1e-12)).
double cross_entropy(std::span<const double> probs, int target);

MetricReport report(const Image& out, const Image& reference);

}  // namespace metrics
}  // namespace derain
