//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use fundus_tk::evaluate::{evaluate_run, EvalConfig, LesionClass};
use fundus_tk::io::{encode_pmap, read_fovea_stats};
use fundus_tk::losses::{lovasz_binary, lovasz_extension};
use fundus_tk::metrics::{auc, dice, iou, Confusion};
use fundus_tk::postprocess::{
    extract_fovea, localize_fovea_detailed, rasterize_fovea, FoveaSource, FoveaStats,
};
use fundus_tk::preprocess::{gaussian_blur, illumination_correct, IlluminationParams};
use fundus_tk::sampler::{epoch_draws, epoch_indices, minority_fraction, ScheduleConfig};
use fundus_tk::tiler::{default_plan, plan_tiles, slice_tiles, stitch_at_scale, Tile};
use fundus_tk::{centroid, BinaryMask, ImageMeta, Point, ProbMap, Raster, ResolutionGroup};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_detection_f1() -> Outcome {
    let start = Instant::now();
    let validation = Confusion { tp: 6, fp: 0, fn_: 6, tn: 388 }.f1();
    let test = Confusion { tp: 6, fp: 0, fn_: 5, tn: 389 }.f1();
    let elapsed = start.elapsed();
    check(format!("{validation:.4}") == "0.6667", || format!("TP6/FN6 gave {validation}"))?;
    check(format!("{test:.4}") == "0.7059", || format!("TP6/FN5 gave {test}"))?;
    // Same counts through the presence-list API.
    let gt: Vec<bool> = (0..400).map(|i| i < 12).collect();
    let pred: Vec<bool> = (0..400).map(|i| i < 6).collect();
    let via_lists = fundus_tk::metrics::detection_f1(&pred, &gt).map_err(|e| e.to_string())?;
    check(via_lists == validation, || format!("list API gave {via_lists}"))?;
    check(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{validation:.4} / {test:.4} in {elapsed:?}"))
}

fn c2_auc() -> Outcome {
    let start = Instant::now();
    let mut rng = TestRng::new(2);
    let mut worst = 0.0f64;
    let mut tied = 0;
    for inst in 0..1000 {
        let n = 200;
        let mut labels: Vec<bool> = (0..n).map(|_| rng.chance(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let mut scores: Vec<f64> = (0..n).map(|_| rng.range(-3.0, 3.0)).collect();
        if inst % 5 == 0 {
            tied += 1;
            for s in scores.iter_mut() {
                *s = (*s * 2.0).round() / 2.0;
            }
        }
        let got = auc(&scores, &labels).map_err(|e| e.to_string())?;
        let want = auc_pairs_oracle(&scores, &labels);
        worst = worst.max((got - want).abs());
        if inst < 50 {
            let affine: Vec<f64> = scores.iter().map(|s| 3.5 * s - 7.0).collect();
            let cubic: Vec<f64> = scores.iter().map(|s| s * s * s + s).collect();
            for t in [&affine, &cubic] {
                let v = auc(t, &labels).map_err(|e| e.to_string())?;
                check(v == got, || format!("instance {inst}: transform changed AUC {got} -> {v}"))?;
            }
        }
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 instances ({tied} tied), max |Δ| = {worst:e}, {elapsed:?}"))
}

fn c3_dice() -> Outcome {
    let mut rng = TestRng::new(3);
    let mut worst_identity = 0.0f64;
    let mut excluded = 0;
    for i in 0..500 {
        let density = rng.range(0.0, 0.6);
        let pred = rng.mask(64, 64, density);
        let gt_density = rng.range(0.01, 0.6);
        let gt = if i % 50 == 0 { BinaryMask::empty(64, 64).unwrap() } else { rng.mask(64, 64, gt_density) };
        let got = dice(&pred, &gt).map_err(|e| e.to_string())?;
        let want = dice_oracle(&pred, &gt);
        check(got == want, || format!("pair {i}: {got:?} vs oracle {want:?}"))?;
        let swapped = dice(&gt, &pred).map_err(|e| e.to_string())?;
        match (got, iou(&pred, &gt).map_err(|e| e.to_string())?) {
            (Some(d), Some(j)) => {
                worst_identity = worst_identity.max((d - 2.0 * j / (1.0 + j)).abs());
                if !pred.is_empty() {
                    check(swapped == Some(d), || format!("pair {i}: not symmetric"))?;
                }
            }
            (None, _) => excluded += 1,
            (Some(_), None) => return Err(format!("pair {i}: IoU missing")),
        }
    }
    check(worst_identity <= 1e-12, || format!("identity deviation {worst_identity:e}"))?;
    check(excluded == 10, || format!("expected 10 empty-GT exclusions, saw {excluded}"))?;

    // Empty ground truth drops out of the per-class mean.
    let cfg = EvalConfig::default();
    let full = BinaryMask::full(4, 4).unwrap();
    let empty = BinaryMask::empty(4, 4).unwrap();
    let counts = [
        fundus_tk::metrics::overlap_counts(&full, &full).unwrap(),
        fundus_tk::metrics::overlap_counts(&full, &empty).unwrap(),
    ];
    let report = fundus_tk::evaluate::ClassReport::from_counts(&counts, &cfg);
    check(report.dice_mean == Some(1.0) && report.n_excluded == 1, || format!("{report:?}"))?;
    Ok(format!("500 pairs exact, identity max |Δ| = {worst_identity:e}, {excluded} excluded"))
}

fn c4_lovasz() -> Outcome {
    let mut rng = TestRng::new(4);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 1000 {
        let y: Vec<bool> = (0..16).map(|_| rng.chance(0.5)).collect();
        if !y.iter().any(|&v| v) {
            continue;
        }
        let wrong: Vec<bool> = (0..16).map(|_| rng.chance(0.3)).collect();
        let pred: Vec<bool> = y.iter().zip(&wrong).map(|(&y, &e)| y ^ e).collect();
        // Correct pixels sit on the margin, wrong ones at zero: hinge errors in {0, 1}.
        let scores: Vec<f64> = y
            .iter()
            .zip(&wrong)
            .map(|(&y, &e)| if e { 0.0 } else if y { 1.0 } else { -1.0 })
            .collect();
        let got = lovasz_binary(&scores, &y).map_err(|e| e.to_string())?;
        let want = 1.0 - iou_oracle(&pred, &y);
        worst = worst.max((got - want).abs());
        done += 1;
    }
    check(worst <= 1e-9, || format!("max |Δ| = {worst:e}"))?;

    for probe in 0..200 {
        let y: Vec<bool> = (0..16).map(|_| rng.chance(0.5)).collect();
        let errors: Vec<f64> = (0..16).map(|_| rng.range(0.0, 2.0)).collect();
        let base = lovasz_extension(&errors, &y).map_err(|e| e.to_string())?;
        let mut bumped = errors.clone();
        let i = rng.below(16);
        bumped[i] += rng.range(1e-6, 1.0);
        let after = lovasz_extension(&bumped, &y).map_err(|e| e.to_string())?;
        check(after >= base - 1e-12, || format!("probe {probe}: {base} -> {after}"))?;
    }
    Ok(format!("1000 vertices max |Δ| = {worst:e}, 200 monotone probes"))
}

fn c5_fovea_round_trip() -> Outcome {
    let size = 288;
    let mut worst = 0.0f64;
    for r in [25.0, 75.0] {
        for i in 0..10 {
            for j in 0..10 {
                // Off-lattice centres spread over the interior.
                let span = size as f64 - 2.0 * r - 2.0;
                let c = Point::new(r + 1.0 + span * i as f64 / 9.0 + 0.37, r + 1.0 + span * j as f64 / 9.0 - 0.21);
                let c = Point::new(c.x.min(size as f64 - r - 1.0), c.y.min(size as f64 - r - 1.0));
                let mask = rasterize_fovea(c, r, size, size).map_err(|e| e.to_string())?;
                let got = extract_fovea(&mask_to_map(&mask), 0.5)
                    .map_err(|e| e.to_string())?
                    .ok_or_else(|| format!("no blob for r={r} at {c:?}"))?;
                let err = fundus_tk::metrics::euclidean(got, c);
                worst = worst.max(err);
                check(err <= 1.0, || format!("r={r} centre {c:?} -> {got:?}"))?;
            }
        }
    }
    Ok(format!("200 round trips, max error {worst:.4} px"))
}

fn c6_fallback() -> Outcome {
    let stats: FoveaStats = read_fovea_stats(fixture_path("fovea_stats.toml")).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for (w, h) in [(1444usize, 1444usize), (2124, 2156)] {
        let meta = ImageMeta::new("scenario", w, h);
        let g = *stats.get(ResolutionGroup::new(w, h)).map_err(|e| e.to_string())?;
        let empty_map = ProbMap::filled(w, h, 0.0).unwrap();

        // Disc present, no fovea blob.
        let disc = rasterize_fovea(Point::new(w as f64 * 0.75, h as f64 * 0.5), 60.0, w, h).unwrap();
        let dc = centroid(&disc).unwrap();
        let est = localize_fovea_detailed(&empty_map, &disc, &stats, &meta, 0.5).map_err(|e| e.to_string())?;
        let want = Point::new(dc.x + g.mean_dx, dc.y + g.mean_dy);
        check(est.point == want && est.source == FoveaSource::DiscFallback, || format!("{w}x{h} disc fallback {est:?}"))?;

        // Neither disc nor fovea.
        let no_disc = BinaryMask::empty(w, h).unwrap();
        let est = localize_fovea_detailed(&empty_map, &no_disc, &stats, &meta, 0.5).map_err(|e| e.to_string())?;
        let centre = Point::new(w as f64 / 2.0, h as f64 / 2.0);
        check(est.point == centre && est.source == FoveaSource::CenterFallback, || format!("{w}x{h} centre {est:?}"))?;

        // Blob 10 sd away from the expected offset.
        let far = Point::new(dc.x + g.mean_dx + 10.0 * g.sd_dx, dc.y + g.mean_dy);
        let blob = mask_to_map(&rasterize_fovea(far, 20.0, w, h).unwrap());
        let est = localize_fovea_detailed(&blob, &disc, &stats, &meta, 0.5).map_err(|e| e.to_string())?;
        check(est.point == want && est.source == FoveaSource::DiscFallback, || format!("{w}x{h} implausible {est:?}"))?;

        // Plausible blob is kept.
        let near = Point::new(dc.x + g.mean_dx + 0.5 * g.sd_dx, dc.y + g.mean_dy - 0.5 * g.sd_dy);
        let blob = mask_to_map(&rasterize_fovea(near, 20.0, w, h).unwrap());
        let est = localize_fovea_detailed(&blob, &disc, &stats, &meta, 0.5).map_err(|e| e.to_string())?;
        check(est.source == FoveaSource::Prediction, || format!("{w}x{h} plausible {est:?}"))?;
        notes.push(format!("{w}x{h} centre ({}, {})", centre.x, centre.y));
    }
    Ok(notes.join(", "))
}

fn stitch_bytes(tiles: &[Tile], plan: &fundus_tk::tiler::TilePlan) -> Result<Vec<u8>, String> {
    stitch_at_scale(tiles, plan).map(|m| encode_pmap(&m)).map_err(|e| e.to_string())
}

fn c7_stitch() -> Outcome {
    let mut rng = TestRng::new(7);
    let stored = rng.map(302, 302);
    let plan = default_plan(302, 288).map_err(|e| e.to_string())?;
    let tiles = slice_tiles(&stored, &plan).map_err(|e| e.to_string())?;
    let back = stitch_at_scale(&tiles, &plan).map_err(|e| e.to_string())?;
    let worst = back.values().iter().zip(stored.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(worst <= 1e-12, || format!("round trip max |Δ| = {worst:e}"))?;

    // Two overlapping constant tiles.
    let pair_plan = plan_tiles(4, 3, 1).map_err(|e| e.to_string())?;
    let pair: Vec<Tile> = pair_plan
        .tiles
        .iter()
        .map(|&(x0, y0)| Tile { x0, y0, map: ProbMap::filled(3, 3, if x0 == 0 { 0.2 } else { 0.6 }).unwrap() })
        .collect();
    let averaged = stitch_at_scale(&pair, &pair_plan).map_err(|e| e.to_string())?;
    for y in 0..4 {
        for x in 1..3 {
            check(averaged.get(x, y) == 0.4, || format!("overlap pixel ({x},{y}) = {}", averaged.get(x, y)))?;
        }
    }

    let reference = stitch_bytes(&tiles, &plan)?;
    let mut shuffled = tiles.clone();
    for round in 0..10 {
        rng.shuffle(&mut shuffled);
        check(stitch_bytes(&shuffled, &plan)? == reference, || format!("shuffle {round} changed bytes"))?;
    }
    Ok(format!("{} tiles, max |Δ| = {worst:e}, 0.2/0.6 -> 0.4, 10 shuffles byte-equal", tiles.len()))
}

fn c8_sampler() -> Outcome {
    let cfg = ScheduleConfig::new(0.03, 42, 1);
    let f = |e| minority_fraction(e, &cfg);
    check(f(0) == 0.5, || format!("f(0) = {}", f(0)))?;
    check((f(5) - 0.3825).abs() <= 1e-12, || format!("f(5) = {}", f(5)))?;
    // 0.03 + 0.47 * 0.75^6
    check((f(30) - 0.11364990234375).abs() <= 1e-12, || format!("f(30) = {}", f(30)))?;
    for e in 0..100 {
        check(f(e + 1) <= f(e), || format!("f increases at {e}"))?;
    }
    let ids: Vec<u32> = (0..1000).collect();
    let (minority, majority) = ids.split_at(30);
    let a = epoch_indices(minority, majority, 7, &cfg).map_err(|e| e.to_string())?;
    let b = epoch_indices(minority, majority, 7, &cfg).map_err(|e| e.to_string())?;
    check(a == b, || "same seed gave different sequences".into())?;
    let other = epoch_indices(minority, majority, 7, &ScheduleConfig::new(0.03, 43, 1)).map_err(|e| e.to_string())?;
    check(a != other, || "seed has no effect".into())?;

    let mut worst = 0.0f64;
    for e in [0, 5, 12, 30, 60, 100, 1000] {
        let draws = epoch_draws(300, 9700, e, &cfg).map_err(|e| e.to_string())?;
        check(draws.len() == 10_000, || format!("{} draws", draws.len()))?;
        let share = draws.iter().filter(|d| d.minority).count() as f64 / draws.len() as f64;
        let dev = (share - f(e)).abs();
        worst = worst.max(dev);
        check(dev <= 0.02, || format!("epoch {e}: share {share} vs f {}", f(e)))?;
    }
    Ok(format!("f(5)={}, f(30)={}, share max |Δ| = {worst:.4}", f(5), f(30)))
}

fn c9_illumination() -> Outcome {
    let params = IlluminationParams::for_width(64);
    let flat = Raster::filled(64, 64, 3, 173).unwrap();
    let out = illumination_correct(&flat, &params).map_err(|e| e.to_string())?;
    check(out.data().iter().all(|&v| v == params.offset), || "constant image not mapped to offset".into())?;

    let mut rng = TestRng::new(9);
    let big = Raster::new(80, 80, 1, (0..80 * 80).map(|_| rng.below(256) as u8).collect()).unwrap();
    let crop = |x0: usize, y0: usize| {
        let mut v = Vec::with_capacity(64 * 64);
        for y in y0..y0 + 64 {
            for x in x0..x0 + 64 {
                v.push(big.get(x, y, 0));
            }
        }
        Raster::new(64, 64, 1, v).unwrap()
    };
    let p = IlluminationParams { sigma: 2.0, gain: 4.0, offset: 128 };
    let (dx, dy) = (5, 3);
    let a = illumination_correct(&crop(0, 0), &p).map_err(|e| e.to_string())?;
    let b = illumination_correct(&crop(dx, dy), &p).map_err(|e| e.to_string())?;
    let margin = 8;
    for y in margin..64 - margin - dy {
        for x in margin..64 - margin - dx {
            check(b.get(x, y, 0) == a.get(x + dx, y + dy, 0), || format!("shift mismatch at ({x},{y})"))?;
        }
    }

    let small = Raster::new(11, 11, 1, (0..121).map(|_| rng.below(256) as u8).collect()).unwrap();
    let p = IlluminationParams { sigma: 1.5, gain: 4.0, offset: 128 };
    let got = illumination_correct(&small, &p).map_err(|e| e.to_string())?;
    let plane: Vec<f64> = small.data().iter().map(|&v| v as f64).collect();
    let blurred = dense_gaussian_oracle(&plane, 11, 11, 1.5);
    let mut worst = 0i32;
    for (i, (&v, &g)) in plane.iter().zip(&blurred).enumerate() {
        let want = (p.gain * (v - g) + p.offset as f64).round().clamp(0.0, 255.0) as i32;
        worst = worst.max((got.data()[i] as i32 - want).abs());
    }
    check(worst <= 1, || format!("dense oracle differs by {worst} levels"))?;
    // The separable blur itself agrees with the dense one far below a gray level.
    let sep = gaussian_blur(&plane, 11, 11, 1.5).map_err(|e| e.to_string())?;
    let blur_dev = sep.iter().zip(&blurred).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(blur_dev < 1e-9, || format!("blur deviation {blur_dev:e}"))?;
    Ok(format!("flat -> {}, shift exact, dense oracle within {worst} level(s)", params.offset))
}

fn c10_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    for d in [&gt, &pred] {
        std::fs::create_dir_all(d).unwrap();
        write_run(d, 12, 48, 10);
    }
    let report = evaluate_run(&pred, &gt, &EvalConfig::default()).map_err(|e| e.to_string())?;
    check(report.auc == Some(1.0) && report.n_classification == 12, || format!("auc {:?}", report.auc))?;
    check(report.fovea_mean_euclidean == Some(0.0) && report.n_fovea == 12, || {
        format!("euclidean {:?}", report.fovea_mean_euclidean)
    })?;
    check(!report.warning(), || format!("missing {:?}", report.missing))?;
    for class in LesionClass::ALL {
        let r = report.classes.get(&class).ok_or_else(|| format!("no {} report", class.name()))?;
        check(r.dice_mean == Some(1.0), || format!("{} dice {:?}", class.name(), r.dice_mean))?;
        check(r.f1_detection == 1.0, || format!("{} f1 {}", class.name(), r.f1_detection))?;
        check(r.n_images == 12, || format!("{} n {}", class.name(), r.n_images))?;
    }
    Ok("12 images: AUC 1, Dice 1, F1 1, Euclidean 0".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("detection F1 fixtures", c1_detection_f1),
        ("AUC oracle equivalence", c2_auc),
        ("Dice oracle equivalence", c3_dice),
        ("Lovasz vertex identity", c4_lovasz),
        ("fovea round trip", c5_fovea_round_trip),
        ("fovea fallback scenarios", c6_fallback),
        ("stitch round trip", c7_stitch),
        ("sampler schedule", c8_sampler),
        ("illumination correction", c9_illumination),
        ("end-to-end evaluate", c10_end_to_end),
    ];
    let suite = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    let total = suite.elapsed();
    if total >= Duration::from_secs(60) {
        failed += 1;
        println!("suite wall time {total:?} exceeds 60 s");
    } else {
        println!("suite wall time {total:?}");
    }
    println!("{} passed, {failed} failed", criteria.len() - failed.min(criteria.len()));
    if failed > 0 {
        std::process::exit(1);
    }
}
