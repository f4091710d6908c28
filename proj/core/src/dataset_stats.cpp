#include "synthbody/dataset_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "synthbody/error.hpp"
#include "synthbody/serialization.hpp"

namespace synthbody {

namespace fs = std::filesystem;

CountHistogram CountHistogram::with_edges(std::string name, std::vector<double> edges) {
  if (edges.size() < 2) throw InvalidArgument("histogram needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw InvalidArgument("histogram edges must increase");
  }
  CountHistogram h;
  h.name = std::move(name);
  h.counts.assign(edges.size() - 1, 0);
  h.edges = std::move(edges);
  return h;
}

void CountHistogram::add(double value) {
  if (!std::isfinite(value) || value < edges.front() || value > edges.back()) {
    ++outside;
    return;
  }
  auto it = std::upper_bound(edges.begin(), edges.end(), value);
  std::size_t bin = static_cast<std::size_t>(it - edges.begin()) - 1;
  bin = std::min(bin, counts.size() - 1);
  ++counts[bin];
}

std::size_t CountHistogram::total() const {
  std::size_t n = outside;
  for (std::size_t c : counts) n += c;
  return n;
}

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  return w >= 360.0 ? 0.0 : w;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

DatasetStats compute_dataset_stats(const std::vector<SequenceData>& sequences,
                                   const std::vector<std::vector<Keypoints>>& annotations) {
  if (!annotations.empty() && annotations.size() != sequences.size()) {
    throw InvalidArgument("annotations must be empty or match the sequences");
  }
  DatasetStats st;
  st.yaw_deg = CountHistogram::with_edges("camera_yaw_deg", uniform_edges(0.0, 360.0, 36));
  st.elevation_deg = CountHistogram::with_edges("camera_elevation_deg", uniform_edges(-90.0, 90.0, 36));
  st.distance_m = CountHistogram::with_edges("camera_distance_m", uniform_edges(0.0, 12.0, 24));

  std::size_t in_front = 0, visible = 0, occluded = 0, self_occ = 0, total_kp = 0, out_of_frame = 0;
  // Running sums for the spread: per keypoint sum and sum of squares of root-relative coordinates.
  std::vector<Eigen::Vector3d> sum, sum_sq;
  std::size_t spread_frames = 0;
  std::vector<ErrorRecord> by_distance, by_occlusion, by_elevation;

  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const SequenceData& seq = sequences[i];
    ++st.sequences;
    st.frames += seq.frame_count();
    st.yaw_deg.add(wrap_degrees(seq.camera_placement.yaw * kRadToDeg));
    st.elevation_deg.add(seq.camera_placement.elevation * kRadToDeg);
    st.distance_m.add(seq.camera_placement.distance);

    std::size_t seq_occ = 0, seq_front = 0;
    for (const FrameData& f : seq.frames) {
      const Eigen::Index n = f.keypoints_3d.cols();
      if (sum.empty()) {
        sum.assign(n, Eigen::Vector3d::Zero());
        sum_sq.assign(n, Eigen::Vector3d::Zero());
      }
      if (static_cast<std::size_t>(n) == sum.size()) {
        const Eigen::Vector3d root = f.keypoints_3d.col(0);
        for (Eigen::Index k = 0; k < n; ++k) {
          const Eigen::Vector3d rel = f.keypoints_3d.col(k) - root;
          sum[k] += rel;
          sum_sq[k] += rel.cwiseProduct(rel);
        }
        ++spread_frames;
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        ++total_kp;
        if (!f.in_frame[k] || !f.in_front[k]) ++out_of_frame;
        if (!f.in_front[k]) continue;
        ++in_front;
        ++seq_front;
        switch (f.occlusion[k]) {
          case OcclusionLabel::Visible: ++visible; break;
          case OcclusionLabel::Occluded: ++occluded; ++seq_occ; break;
          case OcclusionLabel::SelfOccluded: ++self_occ; break;
        }
      }
    }

    if (!annotations.empty() && !annotations[i].empty()) {
      const auto& fitted = annotations[i];
      if (static_cast<int>(fitted.size()) != seq.frame_count()) {
        throw InvalidArgument("annotation frame count differs for " + seq.spec.sequence_id);
      }
      ++st.annotations;
      double err = 0.0;
      for (int t = 0; t < seq.frame_count(); ++t) {
        const int j = seq.joint_count;
        err += mpjpe(fitted[t].leftCols(j), seq.frames[t].keypoints_3d.leftCols(j));
      }
      err /= std::max(1, seq.frame_count());
      const double occ_frac = seq_front > 0 ? static_cast<double>(seq_occ) / static_cast<double>(seq_front) : 0.0;
      by_distance.push_back({seq.camera_placement.distance, err});
      by_elevation.push_back({seq.camera_placement.elevation * kRadToDeg, err});
      by_occlusion.push_back({occ_frac, err});
    }
  }

  if (in_front > 0) {
    const double d = static_cast<double>(in_front);
    st.visible_rate = static_cast<double>(visible) / d;
    st.occluded_rate = static_cast<double>(occluded) / d;
    st.self_occluded_rate = static_cast<double>(self_occ) / d;
  }
  if (total_kp > 0) st.out_of_frame_rate = static_cast<double>(out_of_frame) / static_cast<double>(total_kp);
  if (spread_frames > 0) {
    const double n = static_cast<double>(spread_frames);
    for (std::size_t k = 0; k < sum.size(); ++k) {
      const Eigen::Vector3d mean = sum[k] / n;
      const Eigen::Vector3d var = (sum_sq[k] / n - mean.cwiseProduct(mean)).cwiseMax(0.0);
      st.pose_spread.push_back(std::sqrt(var.sum()));
    }
  }
  if (!by_distance.empty()) {
    st.error_bins.push_back(bin_density_analysis("camera_distance_m", by_distance, uniform_edges(0.0, 12.0, 12)));
    st.error_bins.push_back(bin_density_analysis("camera_elevation_deg", by_elevation, uniform_edges(-90.0, 90.0, 18)));
    st.error_bins.push_back(bin_density_analysis("occluded_fraction", by_occlusion, uniform_edges(0.0, 1.0, 10)));
  }
  return st;
}

DatasetStats dataset_stats(const std::string& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(dir, ec)) {
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
  } else if (!fs::exists(dir, ec)) {
    return compute_dataset_stats({});
  } else {
    throw InvalidArgument("'" + dir + "' is not a directory");
  }
  std::sort(files.begin(), files.end());

  std::vector<SequenceData> sequences;
  std::map<std::string, std::vector<Keypoints>> fitted;
  for (const fs::path& p : files) {
    nlohmann::json head;
    const std::string text = read_text_file(p.string());
    try {
      head = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
      continue;
    }
    if (!head.is_object()) continue;
    const std::string format = head.value("format", "");
    if (format == "synthbody.sequence") {
      sequences.push_back(sequence_from_json(text));
    } else if (format == "synthbody.annotation") {
      Annotation a = annotation_from_json(text);
      fitted[a.sequence_id] = std::move(a.keypoints);
    }
  }
  std::vector<std::vector<Keypoints>> annotations;
  if (!fitted.empty()) {
    for (const SequenceData& s : sequences) {
      auto it = fitted.find(s.spec.sequence_id);
      annotations.push_back(it == fitted.end() ? std::vector<Keypoints>{} : it->second);
    }
  }
  return compute_dataset_stats(sequences, annotations);
}

std::string histogram_csv(const std::vector<CountHistogram>& histograms) {
  std::ostringstream out;
  out << "factor,bin_lo,bin_hi,count\n";
  for (const CountHistogram& h : histograms) {
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      out << h.name << ',' << fmt(h.edges[b]) << ',' << fmt(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
    }
  }
  return out.str();
}

std::string summary_csv(const DatasetStats& s) {
  std::ostringstream out;
  out << "key,value\n";
  out << "sequences," << s.sequences << '\n';
  out << "frames," << s.frames << '\n';
  out << "annotations," << s.annotations << '\n';
  out << "visible_rate," << fmt(s.visible_rate) << '\n';
  out << "occluded_rate," << fmt(s.occluded_rate) << '\n';
  out << "self_occluded_rate," << fmt(s.self_occluded_rate) << '\n';
  out << "out_of_frame_rate," << fmt(s.out_of_frame_rate) << '\n';
  for (std::size_t k = 0; k < s.pose_spread.size(); ++k) {
    out << "pose_spread_m_" << k << ',' << fmt(s.pose_spread[k]) << '\n';
  }
  return out.str();
}

std::string error_bins_csv(const std::vector<BinReport>& bins) {
  std::ostringstream out;
  out << "factor,bin_lo,bin_hi,count,mean_error_mm\n";
  for (const BinReport& r : bins) {
    for (std::size_t b = 0; b < r.counts.size(); ++b) {
      out << r.factor << ',' << fmt(r.edges[b]) << ',' << fmt(r.edges[b + 1]) << ',' << r.counts[b] << ','
          << (r.defined[b] ? fmt(r.mean_error[b]) : "") << '\n';
    }
  }
  return out.str();
}

std::string histogram_svg(const CountHistogram& h) {
  const double width = 640, height = 320, margin = 40;
  const double plot_w = width - 2 * margin, plot_h = height - 2 * margin;
  std::size_t peak = 0;
  for (std::size_t c : h.counts) peak = std::max(peak, c);
  const double bar_w = plot_w / static_cast<double>(h.counts.size());
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << h.name
      << " (n=" << h.total() - h.outside << ")</text>\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double frac = peak > 0 ? static_cast<double>(h.counts[b]) / static_cast<double>(peak) : 0.0;
    const double bh = frac * plot_h;
    out << "<rect x=\"" << fmt(margin + bar_w * static_cast<double>(b)) << "\" y=\"" << fmt(margin + plot_h - bh)
        << "\" width=\"" << fmt(bar_w * 0.9) << "\" height=\"" << fmt(bh) << "\" fill=\"steelblue\"/>\n";
  }
  out << "<line x1=\"" << margin << "\" y1=\"" << margin + plot_h << "\" x2=\"" << margin + plot_w << "\" y2=\""
      << margin + plot_h << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << margin << "\" y=\"" << height - 12 << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << fmt(h.edges.front()) << "</text>\n";
  out << "<text x=\"" << margin + plot_w << "\" y=\"" << height - 12
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt(h.edges.back()) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

void write_dataset_stats(const DatasetStats& stats, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path d(out_dir);
  write_text_file((d / "summary.csv").string(), summary_csv(stats));
  write_text_file((d / "histograms.csv").string(),
                  histogram_csv({stats.yaw_deg, stats.elevation_deg, stats.distance_m}));
  write_text_file((d / "error_bins.csv").string(), error_bins_csv(stats.error_bins));
  for (const CountHistogram* h : {&stats.yaw_deg, &stats.elevation_deg, &stats.distance_m}) {
    write_text_file((d / (h->name + ".svg")).string(), histogram_svg(*h));
  }
}

}  // namespace synthbody
