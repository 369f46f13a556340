#include "spine3d/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "spine3d/checkpoint.hpp"
#include "spine3d/io.hpp"
#include "spine3d/parallel.hpp"
#include "spine3d/phantom.hpp"
#include "spine3d/random.hpp"
#include "spine3d/reconstruction.hpp"
#include "spine3d/registration.hpp"

namespace spine3d {

namespace {

constexpr std::uint64_t kTagAlign = 0x414C474E;  // "ALGN"
constexpr std::uint64_t kTagModel = 0x4D4F444C;  // "MODL"
constexpr std::uint64_t kTagTrain = 0x5452414E;  // "TRAN"
constexpr std::uint64_t kTagFolds = 0x464F4C44;  // "FOLD"

std::vector<double> slice(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c) {
  std::vector<double> out = a;
  out.insert(out.end(), b.begin(), b.end());
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

std::vector<double> plane_values(const PlaneCurves& p) { return slice(p.lo, p.mid, p.hi); }

const PlaneCurves& plane_of(const CurveSet& c, std::size_t target) { return target == 2 ? c.sagittal : c.coronal; }

std::filesystem::path manifest_path(const ExperimentConfig& cfg) { return cfg.dataset_dir() / "manifest.csv"; }

DatasetManifest load_manifest(const ExperimentConfig& cfg) {
  const auto path = manifest_path(cfg);
  if (!std::filesystem::exists(path)) throw IoError(path.string() + " not found; run generate first");
  return read_manifest(path);
}

std::vector<CurveSet> predict_all(const RegressorModel& model, const std::vector<TrainSample>& samples, int threads) {
  std::vector<CurveSet> out(samples.size());
  parallel_for(samples.size(), threads,
               [&](std::size_t, std::size_t i) { out[i] = predict_curveset(model, samples[i].image); });
  return out;
}

std::vector<CurveSet> targets_of(const std::vector<TrainSample>& samples) {
  std::vector<CurveSet> out;
  for (const TrainSample& s : samples) out.push_back(curveset_from_outputs(s.target));
  return out;
}

std::vector<VoxelMask> load_volumes(const ExperimentConfig& cfg, const std::vector<SampleRecord>& records) {
  std::vector<VoxelMask> out(records.size());
  parallel_for(records.size(), cfg.threads, [&](std::size_t, std::size_t i) {
    try {
      out[i] = read_volume(cfg.dataset_dir() / records[i].volume);
    } catch (const std::exception& e) {
      throw IoError("sample " + records[i].id + ": " + e.what());
    }
  });
  return out;
}

std::vector<std::string> ids_of(const std::vector<SampleRecord>& records) {
  std::vector<std::string> out;
  for (const SampleRecord& r : records) out.push_back(r.id);
  return out;
}

void write_reports_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports) {
  CsvTable t;
  t.header = metric_csv_header();
  for (const MetricReport& r : reports) t.rows.push_back(metric_csv_row(r));
  write_csv(path, t);
}

RegressorModel fit(const ExperimentConfig& cfg, const std::vector<TrainSample>& train_set,
                   const std::vector<TrainSample>& val_set, std::uint64_t stream, TrainHistory& history,
                   std::ostream* log, const std::string& label) {
  RegressorModel model = make_initial_model(cfg, train_set);
  TrainConfig tc = effective_train_config(cfg);
  tc.seed = derive_seed(tc.seed, {stream});
  history = train(model, train_set, val_set, tc, [&](const EpochRecord& r) {
    if (log && (r.epoch == 1 || r.epoch % 10 == 0 || r.epoch == tc.epochs))
      *log << label << " epoch " << r.epoch << "/" << tc.epochs << "  train " << fixed(r.train_loss, 4) << "  val "
           << fixed(r.val_loss, 4) << "  lr " << format_double(r.lr) << "\n";
    return true;
  });
  return model;
}

}  // namespace

EvalResult evaluate_curves(const std::vector<std::string>& ids, const std::vector<CurveSet>& predicted,
                           const std::vector<CurveSet>& reference, const std::vector<VoxelMask>& volumes,
                           double voxel_size_mm, int threads) {
  const std::size_t n = predicted.size();
  if (ids.size() != n || reference.size() != n || volumes.size() != n)
    throw std::invalid_argument("evaluate_curves: inconsistent input sizes");
  if (n == 0) throw std::invalid_argument("evaluate_curves: no samples");

  EvalResult result;
  result.samples.resize(n);
  parallel_for(n, threads, [&](std::size_t, std::size_t i) {
    SampleEval& s = result.samples[i];
    s.id = ids[i];
    for (std::size_t t = 0; t < kTargets.size(); ++t) {
      const PlaneCurves& p = plane_of(predicted[i], t);
      const PlaneCurves& g = plane_of(reference[i], t);
      const std::vector<double> pv = plane_values(p), gv = plane_values(g);
      s.mae[t] = mae(pv, gv);
      s.re[t] = relative_error(pv, gv);
      s.iou2d[t] = iou(mask_from_lateral_curves(p.lo, p.hi), mask_from_lateral_curves(g.lo, g.hi));
    }
    ReconstructConfig rc;
    rc.voxel_size_mm = voxel_size_mm;
    s.iou3d = iou(reconstruct_volume(predicted[i], rc), volumes[i]);
    s.deviation_voxels =
        curve_deviation_3d(centerline3d(predicted[i]), centerline3d(reference[i]), voxel_size_mm).voxels;
  });

  std::vector<double> iou3d, dev;
  for (const SampleEval& s : result.samples) {
    iou3d.push_back(s.iou3d);
    dev.push_back(s.deviation_voxels);
  }
  for (std::size_t t = 0; t < kTargets.size(); ++t) {
    std::vector<double> m, r, i2;
    for (const SampleEval& s : result.samples) {
      m.push_back(s.mae[t]);
      r.push_back(s.re[t]);
      i2.push_back(s.iou2d[t]);
    }
    MetricReport rep;
    rep.target = kTargets[t];
    rep.samples = static_cast<int>(n);
    rep.mae_px = summarize(m);
    rep.re = summarize(r);
    rep.iou2d = summarize(i2).mean;
    rep.iou3d = summarize(iou3d).mean;
    rep.map_at = map_at_thresholds(iou3d);
    rep.deviation_voxels = summarize(dev).mean;
    rep.deviation_mm = rep.deviation_voxels * voxel_size_mm;
    result.reports.push_back(rep);
  }
  return result;
}

CurveSet mean_curve_baseline(const std::vector<TrainSample>& train_set) {
  return curveset_from_outputs(mean_target(train_set));
}

std::vector<TrainSample> to_train_samples(const std::filesystem::path& dataset_dir,
                                          const std::vector<SampleRecord>& records, int threads) {
  std::vector<TrainSample> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t, std::size_t i) {
    const LoadedSample s = load_sample(dataset_dir, records[i], false);
    out[i].id = records[i].id;
    out[i].image = s.render;
    out[i].target = flatten(s.curves);
  });
  return out;
}

RegressorModel make_initial_model(const ExperimentConfig& cfg, const std::vector<TrainSample>& train_set) {
  RegressorModel model(cfg.model);
  model.initialize(derive_seed(cfg.seed, {kTagModel}));
  model.set_output_offset(mean_target(train_set));
  return model;
}

TrainConfig effective_train_config(const ExperimentConfig& cfg) {
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, {kTagTrain});
  tc.threads = cfg.threads;
  return tc;
}

DatasetManifest cmd_generate(const ExperimentConfig& cfg, std::ostream* log) {
  const DatasetManifest m = generate_dataset(cfg);
  if (log) {
    int counts[3] = {0, 0, 0}, pos[3] = {0, 0, 0};
    for (const SampleRecord& r : m.samples) {
      counts[static_cast<int>(r.split)] += 1;
      pos[static_cast<int>(r.split)] += r.scoliosis ? 1 : 0;
    }
    *log << "generated " << m.samples.size() << " samples in " << cfg.dataset_dir().string() << "\n";
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
      const int k = static_cast<int>(s);
      *log << "  " << to_string(s) << ": " << counts[k] << " samples, " << pos[k] << " scoliosis\n";
    }
  }
  return m;
}

AlignSummary cmd_align(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  DatasetManifest m = load_manifest(cfg);
  const std::size_t n = m.samples.size();
  std::vector<AlignmentReport> reports(n);
  const AlignStageConfig& ac = cfg.align;
  parallel_for(n, cfg.threads, [&](std::size_t, std::size_t i) {
    const SampleRecord& rec = m.samples[i];
    try {
      const LoadedSample s = load_sample(cfg.dataset_dir(), rec);
      const Image2D fixed_img = s.render;
      const Mask2D fixed_mask = to_crop_frame(project(s.volume, Plane::Coronal));
      Image2D moving_img = to_crop_frame(sum_projection(s.volume, Plane::Coronal));
      Mask2D moving_mask = fixed_mask;

      Rng rng(derive_seed(cfg.seed, {kTagAlign, static_cast<std::uint64_t>(i)}));
      const RigidTransform2D perturb{uniform(rng, -ac.perturb_theta_deg, ac.perturb_theta_deg),
                                     uniform(rng, -ac.perturb_shift_px, ac.perturb_shift_px),
                                     uniform(rng, -ac.perturb_shift_px, ac.perturb_shift_px)};
      const bool bent = uniform(rng, 0.0, 1.0) < ac.bend_fraction && ac.bend_amplitude_px > 0.0;
      const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      if (bent) {
        const double amp = sign * ac.bend_amplitude_px;
        moving_img = bend(moving_img, amp, kCropRowOffset, kCropRowOffset + kLevels - 1);
        moving_mask = bend(moving_mask, amp);
      }
      moving_img = apply_transform(perturb, moving_img);
      moving_mask = apply_transform(perturb, moving_mask);
      reports[i] = align_pair(fixed_img, moving_img, fixed_mask, moving_mask, ac.align);
    } catch (const std::exception& e) {
      throw std::runtime_error("align " + rec.id + ": " + e.what());
    }
  });

  CsvTable t;
  t.header = {"pair_id", "theta", "tx", "ty", "iou", "accepted"};
  AlignSummary summary;
  summary.pairs = static_cast<int>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const AlignmentReport& r = reports[i];
    m.samples[i].aligned = r.accepted;
    summary.accepted += r.accepted ? 1 : 0;
    t.rows.push_back({m.samples[i].id, fixed(r.composed.theta, 6), fixed(r.composed.tx, 6), fixed(r.composed.ty, 6),
                      fixed(r.mask_iou, 6), r.accepted ? "1" : "0"});
  }
  summary.rejection_rate = n ? 1.0 - static_cast<double>(summary.accepted) / static_cast<double>(n) : 0.0;
  write_csv(cfg.dataset_dir() / "alignment.csv", t);
  write_manifest(manifest_path(cfg), m);
  if (log)
    *log << "aligned " << n << " pairs: " << summary.accepted << " accepted, " << n - summary.accepted
         << " rejected (" << fixed(100.0 * summary.rejection_rate, 1) << "%)\n";
  return summary;
}

TrainHistory cmd_train(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const DatasetManifest m = load_manifest(cfg);
  const std::vector<SampleRecord> train_recs = m.select(Split::Train), val_recs = m.select(Split::Val);
  if (train_recs.empty()) throw std::runtime_error("train: no aligned training samples");
  const auto dir = cfg.dataset_dir();
  const std::vector<TrainSample> train_set = to_train_samples(dir, train_recs, cfg.threads);
  const std::vector<TrainSample> val_set = to_train_samples(dir, val_recs, cfg.threads);
  const auto run = cfg.run_dir();
  if (log) *log << "training on " << train_set.size() << " samples, validating on " << val_set.size() << "\n";

  TrainHistory history;
  const RegressorModel model = fit(cfg, train_set, val_set, 0, history, log, "model");
  write_checkpoint(run / "checkpoints" / "model.ckpt", model);
  write_text(run / "history.csv", format_history_csv(history));
  write_text(run / "config.ini", format_experiment_config(cfg));

  if (cfg.cross_validate) {
    std::vector<SampleRecord> pool = train_recs;
    pool.insert(pool.end(), val_recs.begin(), val_recs.end());
    std::vector<TrainSample> pool_set = train_set;
    pool_set.insert(pool_set.end(), val_set.begin(), val_set.end());
    std::vector<bool> labels;
    for (const SampleRecord& r : pool) labels.push_back(r.scoliosis);
    const std::vector<int> folds = stratified_folds(labels, cfg.folds, derive_seed(cfg.seed, {kTagFolds}));

    CsvTable cv;
    cv.header = {"fold", "train_size"};
    for (const auto& h : metric_csv_header()) cv.header.push_back(h);
    for (int f = 0; f < cfg.folds; ++f) {
      std::vector<TrainSample> tr, va;
      std::vector<SampleRecord> va_recs;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (folds[i] == f) {
          va.push_back(pool_set[i]);
          va_recs.push_back(pool[i]);
        } else {
          tr.push_back(pool_set[i]);
        }
      }
      if (tr.empty() || va.empty()) throw std::runtime_error("train: fold " + std::to_string(f) + " is empty");
      TrainHistory fh;
      const RegressorModel fm =
          fit(cfg, tr, va, static_cast<std::uint64_t>(f) + 1, fh, log, "fold " + std::to_string(f));
      write_checkpoint(run / "checkpoints" / ("fold" + std::to_string(f) + ".ckpt"), fm);
      write_text(run / ("history_fold" + std::to_string(f) + ".csv"), format_history_csv(fh));
      const EvalResult er = evaluate_curves(ids_of(va_recs), predict_all(fm, va, cfg.threads), targets_of(va),
                                            load_volumes(cfg, va_recs), cfg.eval.voxel_size_mm, cfg.threads);
      for (const MetricReport& r : er.reports) {
        std::vector<std::string> row{std::to_string(f), std::to_string(tr.size())};
        for (auto& c : metric_csv_row(r)) row.push_back(c);
        cv.rows.push_back(row);
      }
    }
    write_csv(run / "reports" / "cv_metrics.csv", cv);
  }

  if (!cfg.sweep_sizes.empty()) {
    const std::vector<SampleRecord> test_recs = m.select(Split::Test);
    const std::vector<TrainSample> test_set = to_train_samples(dir, test_recs, cfg.threads);
    const std::vector<VoxelMask> test_vols = load_volumes(cfg, test_recs);
    CsvTable sweep;
    sweep.header = {"train_size", "coronal_mae", "sagittal_mae", "sagittal_iou2d", "iou3d"};
    for (int size : cfg.sweep_sizes) {
      const auto k = std::min(static_cast<std::size_t>(size), train_set.size());
      const std::vector<TrainSample> subset(train_set.begin(), train_set.begin() + static_cast<std::ptrdiff_t>(k));
      TrainHistory sh;
      const RegressorModel sm =
          fit(cfg, subset, val_set, 1000 + static_cast<std::uint64_t>(size), sh, log, "sweep " + std::to_string(size));
      const EvalResult er = evaluate_curves(ids_of(test_recs), predict_all(sm, test_set, cfg.threads),
                                            targets_of(test_set), test_vols, cfg.eval.voxel_size_mm, cfg.threads);
      sweep.rows.push_back({std::to_string(k), fixed(er.reports[1].mae_px.mean, 6),
                            fixed(er.reports[2].mae_px.mean, 6), fixed(er.reports[2].iou2d, 6),
                            fixed(er.reports[2].iou3d, 6)});
    }
    write_csv(run / "reports" / "sweep.csv", sweep);
  }
  return history;
}

EvalResult cmd_eval(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const DatasetManifest m = load_manifest(cfg);
  const auto run = cfg.run_dir();
  const auto ckpt = run / "checkpoints" / "model.ckpt";
  if (!std::filesystem::exists(ckpt)) throw IoError(ckpt.string() + " not found; run train first");
  const RegressorModel model = read_checkpoint(ckpt);

  const std::vector<SampleRecord> test_recs = m.select(Split::Test);
  if (test_recs.empty()) throw std::runtime_error("eval: test split has no aligned samples");
  const auto dir = cfg.dataset_dir();
  const std::vector<TrainSample> test_set = to_train_samples(dir, test_recs, cfg.threads);
  const std::vector<VoxelMask> volumes = load_volumes(cfg, test_recs);
  const std::vector<CurveSet> reference = targets_of(test_set);
  const std::vector<std::string> ids = ids_of(test_recs);

  const std::vector<CurveSet> predicted = predict_all(model, test_set, cfg.threads);
  const EvalResult result = evaluate_curves(ids, predicted, reference, volumes, cfg.eval.voxel_size_mm, cfg.threads);

  const CurveSet baseline = mean_curve_baseline(to_train_samples(dir, m.select(Split::Train), cfg.threads));
  const EvalResult base = evaluate_curves(ids, std::vector<CurveSet>(ids.size(), baseline), reference, volumes,
                                          cfg.eval.voxel_size_mm, cfg.threads);

  write_reports_csv(run / "reports" / "metrics.csv", result.reports);
  write_reports_csv(run / "reports" / "baseline_metrics.csv", base.reports);

  CsvTable map;
  map.header = {"threshold", "model", "baseline"};
  for (int k = 0; k < kMapThresholds; ++k)
    map.rows.push_back({fixed(map_threshold(k), 1), fixed(result.reports[0].map_at[static_cast<std::size_t>(k)], 6),
                        fixed(base.reports[0].map_at[static_cast<std::size_t>(k)], 6)});
  write_csv(run / "reports" / "map.csv", map);

  CsvTable per;
  per.header = {"id", "mae_dxa", "mae_coronal", "mae_sagittal", "iou2d_coronal", "iou2d_sagittal", "iou3d",
                "deviation_voxels"};
  for (const SampleEval& s : result.samples)
    per.rows.push_back({s.id, fixed(s.mae[0], 6), fixed(s.mae[1], 6), fixed(s.mae[2], 6), fixed(s.iou2d[1], 6),
                        fixed(s.iou2d[2], 6), fixed(s.iou3d, 6), fixed(s.deviation_voxels, 6)});
  write_csv(run / "reports" / "per_sample.csv", per);

  const std::size_t figs = std::min(ids.size(), static_cast<std::size_t>(cfg.eval.figures));
  for (std::size_t i = 0; i < figs; ++i) {
    write_text(run / "figures" / (ids[i] + "_curves.svg"),
               render_views_svg(volumes[i], &predicted[i], &reference[i], ids[i] + " ground truth vs predicted"));
    ReconstructConfig rc;
    rc.voxel_size_mm = cfg.eval.voxel_size_mm;
    write_text(run / "figures" / (ids[i] + "_reconstruction.svg"),
               render_views_svg(reconstruct_volume(predicted[i], rc), &predicted[i], nullptr,
                                ids[i] + " reconstructed"));
    write_text(run / "figures" / (ids[i] + "_sections.svg"), render_cross_sections_svg(predicted[i]));
  }

  if (log) {
    for (const MetricReport& r : result.reports) *log << format_metric_text(r);
    *log << "mean-curve baseline:\n";
    for (const MetricReport& r : base.reports) *log << format_metric_text(r);
  }
  cmd_report(cfg, nullptr);
  return result;
}

void reconstruct_curves_file(const std::filesystem::path& curves_csv, const std::filesystem::path& volume_out,
                             double voxel_size_mm) {
  const CurveSet curves = read_curveset_csv(curves_csv);
  ReconstructConfig rc;
  rc.voxel_size_mm = voxel_size_mm;
  const VoxelMask vol = reconstruct_volume(curves, rc);
  write_volume(volume_out, vol);
  auto svg = volume_out;
  svg.replace_extension(".svg");
  write_text(svg, render_views_svg(vol, &curves, nullptr, curves_csv.filename().string()));
}

void cmd_reconstruct(const ExperimentConfig& cfg, const std::vector<std::string>& ids, std::ostream* log) {
  cfg.validate();
  const DatasetManifest m = load_manifest(cfg);
  const auto run = cfg.run_dir();
  const RegressorModel model = read_checkpoint(run / "checkpoints" / "model.ckpt");
  std::vector<SampleRecord> recs;
  if (ids.empty()) {
    recs = m.select(Split::Test);
  } else {
    for (const std::string& id : ids) {
      const auto it = std::find_if(m.samples.begin(), m.samples.end(), [&](const auto& r) { return r.id == id; });
      if (it == m.samples.end()) throw std::invalid_argument("reconstruct: unknown sample id '" + id + "'");
      recs.push_back(*it);
    }
  }
  const std::vector<TrainSample> samples = to_train_samples(cfg.dataset_dir(), recs, cfg.threads);
  parallel_for(samples.size(), cfg.threads, [&](std::size_t, std::size_t i) {
    const CurveSet pred = predict_curveset(model, samples[i].image);
    ReconstructConfig rc;
    rc.voxel_size_mm = cfg.eval.voxel_size_mm;
    const VoxelMask vol = reconstruct_volume(pred, rc);
    const auto base = run / "volumes" / samples[i].id;
    write_curveset_csv(base.string() + "_curves.csv", pred);
    write_volume(base.string() + ".vol", vol);
    CsvTable cl;
    cl.header = {"x", "y", "z"};
    for (const Point3& p : centerline3d(pred)) cl.rows.push_back({fixed(p.x, 4), fixed(p.y, 4), fixed(p.z, 4)});
    write_csv(base.string() + "_centerline.csv", cl);
    write_text(run / "figures" / (samples[i].id + "_reconstruction.svg"),
               render_views_svg(vol, &pred, nullptr, samples[i].id + " reconstructed"));
  });
  if (log) *log << "reconstructed " << samples.size() << " volumes into " << (run / "volumes").string() << "\n";
}

std::string cmd_report(const ExperimentConfig& cfg, std::ostream* log) {
  const auto reports = cfg.run_dir() / "reports";
  const CsvTable model = read_csv(reports / "metrics.csv");
  const CsvTable base = read_csv(reports / "baseline_metrics.csv");
  const CsvTable map = read_csv(reports / "map.csv");

  std::ostringstream out;
  out << "run: " << cfg.run_name << "  seed: " << cfg.seed << "\n\n";
  out << "Spine curve regression (test split)\n";
  out << "target    model     n    | abs err px: mean  median  sd     | rel err: mean  median  sd    | IoU 2D  IoU 3D"
         "  | dev vox  dev mm\n";
  auto block = [&](const CsvTable& t, const char* name) {
    for (const auto& row : t.rows) {
      auto cell = [&](const char* col) { return row[static_cast<std::size_t>(t.column(col))]; };
      auto pct = [&](const char* col) { return fixed(100.0 * parse_double(cell(col), col), 1); };
      char line[256];
      std::snprintf(line, sizeof(line),
                    "%-9s %-9s %-4s |            %7s %7s %6s | %13s %7s %5s | %6s  %6s  | %7s  %6s\n",
                    cell("target").c_str(), name, cell("samples").c_str(),
                    fixed(parse_double(cell("mae_mean"), "mae_mean"), 3).c_str(),
                    fixed(parse_double(cell("mae_median"), "mae_median"), 3).c_str(),
                    fixed(parse_double(cell("mae_sd"), "mae_sd"), 3).c_str(),
                    fixed(parse_double(cell("re_mean"), "re_mean"), 4).c_str(),
                    fixed(parse_double(cell("re_median"), "re_median"), 4).c_str(),
                    fixed(parse_double(cell("re_sd"), "re_sd"), 4).c_str(), pct("iou2d").c_str(), pct("iou3d").c_str(),
                    fixed(parse_double(cell("deviation_voxels"), "deviation_voxels"), 3).c_str(),
                    fixed(parse_double(cell("deviation_mm"), "deviation_mm"), 3).c_str());
      out << line;
    }
  };
  block(model, "model");
  block(base, "baseline");

  out << "\nmAP over 3D IoU thresholds\nthreshold  model   baseline\n";
  for (const auto& row : map.rows) {
    char line[96];
    std::snprintf(line, sizeof(line), "%-9s  %-6s  %s\n", row[0].c_str(),
                  fixed(parse_double(row[1], "model"), 3).c_str(), fixed(parse_double(row[2], "baseline"), 3).c_str());
    out << line;
  }
  const std::string text = out.str();
  write_text(cfg.run_dir() / "summary.txt", text);
  if (log) *log << text;
  return text;
}

}  // namespace spine3d
