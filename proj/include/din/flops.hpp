#pragma once

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "din/netspec.hpp"

namespace din {

// Static complexity analysis. Convention: one multiply-accumulate is one
// FLOP, bias additions fold into the MAC count, and pooling, upsampling,
// activations and elementwise additions cost one FLOP per output element.
// Normalization costs 4 FLOPs per element (statistics plus apply).

struct FlopRow {
  std::string name;
  std::string kind;
  int64_t out_c = 0, out_h = 0, out_w = 0;
  int64_t flops = 0;
};

struct FlopReport {
  std::string network;
  int64_t in_h = 0, in_w = 0;
  std::vector<FlopRow> rows;
  std::map<std::string, int64_t> section_totals;  // keyed by name prefix before the first '.'
  int64_t total = 0;
};

namespace detail {

inline std::string section_of(const std::string& name) {
  auto pos = name.find('.');
  return pos == std::string::npos ? name : name.substr(0, pos);
}

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::DsBlock: return "ds_block";
    case LayerKind::ResBlock: return "res_block";
    case LayerKind::Upsample: return "upsample";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::AdaptivePool: return "adaptive_pool";
    case LayerKind::Relu: return "relu";
    case LayerKind::DinSlot: return "din";
  }
  return "?";
}

}  // namespace detail

// DIN slot costs depend on the dynamic convolution configuration, which
// lives outside the NetworkSpec; callers pass it through here.
struct DinSlotCost {
  DinConvType conv_type = DinConvType::Standard;
  int64_t kernel = 1;
};

inline FlopReport count_flops(const NetworkSpec& spec, int64_t in_h, int64_t in_w,
                              const DinSlotCost& din_cost = {}) {
  FlopReport report;
  report.network = spec.name;
  report.in_h = in_h;
  report.in_w = in_w;
  int64_t c = spec.input_channels, h = in_h, w = in_w;
  for (const LayerDesc& l : spec.layers) {
    FlopRow row;
    row.name = l.name;
    row.kind = detail::kind_name(l.kind);
    int64_t flops = 0;
    switch (l.kind) {
      case LayerKind::Conv: {
        check(l.in_ch == c, "count_flops: channel mismatch at '" + l.name + "'");
        const int64_t ho = (h + 2 * l.padding - l.kernel) / l.stride + 1;
        const int64_t wo = (w + 2 * l.padding - l.kernel) / l.stride + 1;
        flops = l.kernel * l.kernel * l.in_ch * l.out_ch * ho * wo;
        if (l.norm) flops += 4 * l.out_ch * ho * wo;
        if (l.act) flops += l.out_ch * ho * wo;
        c = l.out_ch;
        h = ho;
        w = wo;
        break;
      }
      case LayerKind::DsBlock: {
        check(l.in_ch == c, "count_flops: channel mismatch at '" + l.name + "'");
        const int64_t ho = (h + 2 * l.padding - l.kernel) / l.stride + 1;
        const int64_t wo = (w + 2 * l.padding - l.kernel) / l.stride + 1;
        flops = l.kernel * l.kernel * l.in_ch * ho * wo   // depthwise
                + l.in_ch * l.out_ch * ho * wo;           // pointwise
        if (l.norm) flops += 4 * l.out_ch * ho * wo;
        if (l.act) flops += l.out_ch * ho * wo;
        c = l.out_ch;
        h = ho;
        w = wo;
        break;
      }
      case LayerKind::ResBlock: {
        check(l.in_ch == c && l.in_ch == l.out_ch, "count_flops: residual block must preserve channels");
        const int64_t hw = h * w;
        int64_t conv_cost;
        if (l.separable)
          conv_cost = l.kernel * l.kernel * l.in_ch * hw + l.in_ch * l.out_ch * hw;
        else
          conv_cost = l.kernel * l.kernel * l.in_ch * l.out_ch * hw;
        flops = 2 * conv_cost + l.out_ch * hw /*relu*/ + l.out_ch * hw /*skip add*/;
        if (l.norm) flops += 2 * 4 * l.out_ch * hw;
        break;
      }
      case LayerKind::Upsample:
        h *= l.scale;
        w *= l.scale;
        flops = c * h * w;
        break;
      case LayerKind::MaxPool:
        h /= 2;
        w /= 2;
        flops = c * h * w;
        break;
      case LayerKind::AdaptivePool:
        h = l.pool_h;
        w = l.pool_w;
        flops = c * h * w;
        break;
      case LayerKind::Relu:
        flops = c * h * w;
        break;
      case LayerKind::DinSlot: {
        const int64_t hw = h * w;
        const int64_t k = din_cost.kernel;
        flops = 4 * c * hw;  // instance norm
        switch (din_cost.conv_type) {
          case DinConvType::Standard:
            flops += k * k * c * c * hw;
            break;
          case DinConvType::Deformable:
            flops += k * k * c * c * hw        // taps
                     + 4 * k * k * c * hw      // bilinear gathers
                     + 9 * c * 2 * k * k * hw  // offset head conv
                     + 2 * k * k * hw;         // tanh bound
            break;
          case DinConvType::SpatiallyAdaptive:
            flops += round_up_odd(h) * round_up_odd(w) * c * hw  // depthwise full-map kernel
                     + c * hw;                                   // spatial bias
            break;
        }
        flops += c * hw;  // injection add
        break;
      }
    }
    row.out_c = c;
    row.out_h = h;
    row.out_w = w;
    row.flops = flops;
    report.rows.push_back(row);
    report.section_totals[detail::section_of(l.name)] += flops;
    report.total += flops;
  }
  return report;
}

inline std::string format_report(const FlopReport& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s @ %lldx%lld\n", r.network.c_str(), (long long)r.in_h, (long long)r.in_w);
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-24s %-14s %-16s %16s\n", "layer", "kind", "output", "flops");
  os << buf;
  for (const FlopRow& row : r.rows) {
    std::snprintf(buf, sizeof(buf), "%-24s %-14s %4lldx%4lldx%-4lld %16lld\n", row.name.c_str(),
                  row.kind.c_str(), (long long)row.out_c, (long long)row.out_h, (long long)row.out_w,
                  (long long)row.flops);
    os << buf;
  }
  for (const auto& [section, total] : r.section_totals) {
    std::snprintf(buf, sizeof(buf), "  section %-12s %10.4f GFLOPs\n", section.c_str(), total / 1e9);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "  total   %-12s %10.4f GFLOPs (%lld)\n", "", r.total / 1e9,
                (long long)r.total);
  os << buf;
  return os.str();
}

inline std::string format_report_csv(const FlopReport& r) {
  std::ostringstream os;
  for (const FlopRow& row : r.rows)
    os << row.name << ',' << row.kind << ',' << row.out_h << ',' << row.out_w << ',' << row.out_c << ','
       << row.flops << '\n';
  return os.str();
}

// Aligned totals plus all pairwise ratios for a set of named reports.
inline std::string compare_architectures(const std::vector<FlopReport>& reports) {
  check(reports.size() >= 2, "compare_architectures needs at least two networks");
  std::ostringstream os;
  char buf[160];
  for (const FlopReport& r : reports) {
    std::snprintf(buf, sizeof(buf), "%-24s %12.4f GFLOPs\n", r.network.c_str(), r.total / 1e9);
    os << buf;
  }
  for (size_t i = 0; i < reports.size(); ++i)
    for (size_t j = 0; j < reports.size(); ++j) {
      if (i == j) continue;
      std::snprintf(buf, sizeof(buf), "ratio %s / %s = %.2f\n", reports[i].network.c_str(),
                    reports[j].network.c_str(),
                    static_cast<double>(reports[i].total) / static_cast<double>(reports[j].total));
      os << buf;
    }
  return os.str();
}

}  // namespace din
