#include "derain/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "derain/filters.hpp"

namespace derain {

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"psnr", r.psnr}, {"ssim", r.ssim}, {"l1", r.l1}};
}

namespace metrics {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ImageError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) +
                     "x" + std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
  }
}

const std::vector<double>& ssim_taps() {
  static const std::vector<double> taps = filters::gaussian_kernel(kSsimSigma);
  return taps;
}

// Valid-window separable correlation: (w x h) -> (w-10 x h-10).
std::vector<double> window_mean(const std::vector<double>& src, int w, int h) {
  const auto& taps = ssim_taps();
  const int n = kSsimWindow;
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += taps[k] * src[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += taps[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

// Adjoint of window_mean: scatters a (w-10 x h-10) map back onto (w x h).
std::vector<double> window_scatter(const std::vector<double>& src, int w, int h) {
  const auto& taps = ssim_taps();
  const int n = kSsimWindow;
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> cols(static_cast<std::size_t>(ow) * h, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = src[static_cast<std::size_t>(y) * ow + x];
      for (int k = 0; k < n; ++k) cols[static_cast<std::size_t>(y + k) * ow + x] += taps[k] * v;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = cols[static_cast<std::size_t>(y) * ow + x];
      for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(y) * w + x + k] += taps[k] * v;
    }
  }
  return out;
}

struct ChannelStats {
  std::vector<double> mu_a, mu_b, var_a, var_b, cov;
};

ChannelStats channel_stats(const Image& a, const Image& b, int c) {
  const int w = a.width();
  const int h = a.height();
  const std::size_t n = a.pixel_count();
  std::vector<double> xa(n), xb(n), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double va = a.data()[i * Image::kChannels + c];
    const double vb = b.data()[i * Image::kChannels + c];
    xa[i] = va;
    xb[i] = vb;
    aa[i] = va * va;
    bb[i] = vb * vb;
    ab[i] = va * vb;
  }
  ChannelStats s;
  s.mu_a = window_mean(xa, w, h);
  s.mu_b = window_mean(xb, w, h);
  s.var_a = window_mean(aa, w, h);
  s.var_b = window_mean(bb, w, h);
  s.cov = window_mean(ab, w, h);
  for (std::size_t i = 0; i < s.mu_a.size(); ++i) {
    s.var_a[i] -= s.mu_a[i] * s.mu_a[i];
    s.var_b[i] -= s.mu_b[i] * s.mu_b[i];
    s.cov[i] -= s.mu_a[i] * s.mu_b[i];
  }
  return s;
}

void require_ssim_shape(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  if (a.width() < kMinImageSide || a.height() < kMinImageSide ||
      a.width() < kSsimWindow || a.height() < kSsimWindow) {
    throw ImageError("ssim: image smaller than the 11x11 window");
  }
}

constexpr double kC1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
constexpr double kC2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);

}  // namespace

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double l1(const Image& a, const Image& b) {
  require_same_shape(a, b, "l1");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.data()[i] - b.data()[i]);
  return acc / static_cast<double>(a.size());
}

double psnr_from_mse(double m) {
  if (m < kPsnrCapMse) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const Image& a, const Image& b) {
  require_ssim_shape(a, b);
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < Image::kChannels; ++c) {
    const auto s = channel_stats(a, b, c);
    for (std::size_t i = 0; i < s.mu_a.size(); ++i) {
      const double num = (2.0 * s.mu_a[i] * s.mu_b[i] + kC1) * (2.0 * s.cov[i] + kC2);
      const double den = (s.mu_a[i] * s.mu_a[i] + s.mu_b[i] * s.mu_b[i] + kC1) *
                         (s.var_a[i] + s.var_b[i] + kC2);
      total += num / den;
    }
    count += s.mu_a.size();
  }
  return total / static_cast<double>(count);
}

SsimWithGrad ssim_with_grad(const Image& a, const Image& b) {
  require_ssim_shape(a, b);
  const int w = a.width();
  const int h = a.height();
  const std::size_t windows =
      static_cast<std::size_t>(w - kSsimWindow + 1) * (h - kSsimWindow + 1);
  const double norm = 1.0 / static_cast<double>(windows * Image::kChannels);

  SsimWithGrad result{0.0, Image(w, h)};
  for (int c = 0; c < Image::kChannels; ++c) {
    const auto s = channel_stats(a, b, c);
    // dS/dx_k = sum_p w_pk * (ca_p + cb_p * x_k + cc_p * y_k)
    std::vector<double> ca(windows), cb(windows), cc(windows);
    for (std::size_t i = 0; i < windows; ++i) {
      const double ma = s.mu_a[i];
      const double mb = s.mu_b[i];
      const double a1 = 2.0 * ma * mb + kC1;
      const double a2 = 2.0 * s.cov[i] + kC2;
      const double b1 = ma * ma + mb * mb + kC1;
      const double b2 = s.var_a[i] + s.var_b[i] + kC2;
      const double val = a1 * a2 / (b1 * b2);
      result.value += val * norm;

      const double d_mu = 2.0 * mb * a2 / (b1 * b2) - val * 2.0 * ma / b1;
      const double d_var = -val / b2;
      const double d_cov = 2.0 * a1 / (b1 * b2);
      ca[i] = norm * (d_mu - 2.0 * d_var * ma - d_cov * mb);
      cb[i] = norm * 2.0 * d_var;
      cc[i] = norm * d_cov;
    }
    const auto ga = window_scatter(ca, w, h);
    const auto gb = window_scatter(cb, w, h);
    const auto gc = window_scatter(cc, w, h);
    for (std::size_t k = 0; k < a.pixel_count(); ++k) {
      const std::size_t idx = k * Image::kChannels + c;
      result.grad.data()[idx] = ga[k] + gb[k] * a.data()[idx] + gc[k] * b.data()[idx];
    }
  }
  return result;
}

double recon_loss(const Image& out, const Image& gt, double mu) {
  require_same_shape(out, gt, "recon_loss");
  double loss = l1(out, gt);
  if (mu != 0.0) loss += mu * (1.0 - ssim(out, gt));
  return loss;
}

LossWithGrad recon_loss_with_grad(const Image& out, const Image& gt, double mu) {
  require_same_shape(out, gt, "recon_loss");
  LossWithGrad result{l1(out, gt), Image(out.width(), out.height())};
  const double inv_n = 1.0 / static_cast<double>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out.data()[i] - gt.data()[i];
    result.grad.data()[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
  }
  if (mu != 0.0) {
    const auto s = ssim_with_grad(out, gt);
    result.value += mu * (1.0 - s.value);
    for (std::size_t i = 0; i < out.size(); ++i) result.grad.data()[i] -= mu * s.grad.data()[i];
  }
  return result;
}

double cross_entropy(std::span<const double> probs, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= probs.size()) {
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                            " outside [0, " + std::to_string(probs.size()) + ")");
  }
  return -std::log(std::max(probs[target], kProbFloor));
}

MetricReport report(const Image& out, const Image& reference) {
  return MetricReport{psnr(out, reference), ssim(out, reference), l1(out, reference)};
}

}  // namespace metrics
}  // namespace derain
