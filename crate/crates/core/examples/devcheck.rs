// Temporary development harness for calibration experiments. Not part of
// the deliverable surface; removed before release.

use freqband::*;
use rayon::prelude::*;
use std::time::Instant;

fn single_window_rejections(
    model: CovarianceModel,
    reps: usize,
    t_b: usize,
    b: usize,
    r: usize,
    rtest: usize,
    d0: usize,
    width: usize,
) -> (usize, Vec<f64>) {
    let t = t_b * b;
    let k = tapers_for_bandwidth(0.05, t_b).unwrap();
    let results: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let x = simulate_fts(SimSetting::WhiteNoise, t, r, derive_seed(1000, rep as u64, 0))
                .unwrap();
            let plan = make_block_plan(t, b).unwrap();
            let est = multitaper_spectrum(&x, &plan, k).unwrap();
            let g = demean_spectrum(&est).unwrap();
            // projected path: statistic and null on the test grid
            let tg = TestGrid::equally_spaced(r, rtest).unwrap();
            let est = est.restrict(tg.indices()).unwrap();
            let g = g.restrict(tg.indices()).unwrap();
            let sim_grid = TestGrid::equally_spaced(est.n_grid(), est.n_grid()).unwrap();
            let grid = est.grid().clone();
            let eps_k = ((t_b as f64) * (k as f64 + 1.0) / (t_b as f64 + 1.0)).ceil() as usize;
            let w = ScanWindow::new(&grid, eps_k, width).unwrap();
            let q = scan_statistic(&g, &w).unwrap();
            let cov = null_covariance(&est, &w, &sim_grid, false, model).unwrap();
            let draws =
                draw_null_scan(&cov, d0, k, derive_seed(2000, rep as u64, 1), true).unwrap();
            p_value(&draws, q)
        })
        .collect();
    let rejections = results.iter().filter(|&&p| p <= 0.05).count();
    (rejections, results)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("cal");

    match which {
        "cal" => {
            // criterion-5 style: T_B=500, B=10, R=5, single window
            for (name, model) in [
                ("taper", CovarianceModel::TaperWeighted),
                ("diag", CovarianceModel::diagonal()),
                ("printed", CovarianceModel::printed()),
            ] {
                for rtest in [4usize, 5] {
                    let t0 = Instant::now();
                    let (rej, ps) =
                        single_window_rejections(model, 200, 500, 10, 5, rtest, 20_000, 25);
                    let mean_p: f64 = ps.iter().sum::<f64>() / ps.len() as f64;
                    println!(
                        "{name} rtest={rtest}: rejections {rej}/200 (CI [4,16]), mean p {mean_p:.3}, {:?}",
                        t0.elapsed()
                    );
                }
            }
        }
        "cal200" => {
            // criterion-1 scale: T_B=200, B=10
            for (name, model) in [
                ("taper", CovarianceModel::TaperWeighted),
                ("diag", CovarianceModel::diagonal()),
            ] {
                let t0 = Instant::now();
                let (rej, ps) = single_window_rejections(model, 200, 200, 10, 5, 4, 20_000, 10);
                let mean_p: f64 = ps.iter().sum::<f64>() / ps.len() as f64;
                println!(
                    "{name}: rejections {rej}/200, mean p {mean_p:.3}, {:?}",
                    t0.elapsed()
                );
            }
        }
        "mean" => {
            // how close is the simulated null mean to the observed-Q mean?
            let (t_b, b, r, d0) = (500usize, 10usize, 5usize, 50_000usize);
            let t = t_b * b;
            let k = tapers_for_bandwidth(0.05, t_b).unwrap();
            let width = 25;
            let reps = 100;
            let qs: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let x = simulate_fts(SimSetting::WhiteNoise, t, r, 77 + rep as u64).unwrap();
                    let plan = make_block_plan(t, b).unwrap();
                    let est = multitaper_spectrum(&x, &plan, k).unwrap();
                    let g = demean_spectrum(&est).unwrap();
                    let grid = est.grid().clone();
                    let eps_k =
                        ((t_b as f64) * (k as f64 + 1.0) / (t_b as f64 + 1.0)).ceil() as usize;
                    let w = ScanWindow::new(&grid, eps_k, width).unwrap();
                    scan_statistic(&g, &w).unwrap()
                })
                .collect();
            let mean_q: f64 = qs.iter().sum::<f64>() / qs.len() as f64;
            let var_q: f64 =
                qs.iter().map(|q| (q - mean_q).powi(2)).sum::<f64>() / (qs.len() - 1) as f64;
            println!("observed Q: mean {mean_q:.5}, sd {:.5}", var_q.sqrt());

            let x = simulate_fts(SimSetting::WhiteNoise, t, r, 123).unwrap();
            let plan = make_block_plan(t, b).unwrap();
            let est = multitaper_spectrum(&x, &plan, k).unwrap();
            let grid = est.grid().clone();
            let eps_k = ((t_b as f64) * (k as f64 + 1.0) / (t_b as f64 + 1.0)).ceil() as usize;
            let w = ScanWindow::new(&grid, eps_k, width).unwrap();
            for (name, model) in [
                ("taper", CovarianceModel::TaperWeighted),
                ("diag", CovarianceModel::diagonal()),
            ] {
                for rtest in [4usize, 5] {
                    let tg = TestGrid::equally_spaced(r, rtest).unwrap();
                    let cov = null_covariance(&est, &w, &tg, false, model).unwrap();
                    let draws = draw_null_scan(&cov, d0, k, 5, true).unwrap();
                    let mean: f64 =
                        draws.values().iter().sum::<f64>() / draws.len() as f64;
                    let var: f64 = draws
                        .values()
                        .iter()
                        .map(|v| (v - mean).powi(2))
                        .sum::<f64>()
                        / (draws.len() - 1) as f64;
                    println!(
                        "{name} rtest={rtest}: null mean {mean:.5}, sd {:.5}",
                        var.sqrt()
                    );
                }
            }
        }
        "search" => {
            let setting = match args.get(2).map(|s| s.as_str()).unwrap_or("wn") {
                "linear" => SimSetting::Linear,
                "sin" => SimSetting::Sinusoidal,
                _ => SimSetting::WhiteNoise,
            };
            let (t_b, b): (usize, usize) = match setting {
                SimSetting::WhiteNoise => (200, 10),
                SimSetting::Linear => (500, 10),
                SimSetting::Sinusoidal => (500, 20),
            };
            let reps: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
            let d0: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(100_000);
            let r = 5;
            let t = t_b * b;
            let k = tapers_for_bandwidth(0.05, t_b).unwrap();
            for rep in 0..reps {
                let t0 = Instant::now();
                let x = simulate_fts(setting, t, r, derive_seed(31, rep as u64, 7)).unwrap();
                let plan = make_block_plan(t, b).unwrap();
                let est = multitaper_spectrum(&x, &plan, k).unwrap();
                let g = demean_spectrum(&est).unwrap();
                let mut config = SearchConfig::new(r, derive_seed(32, rep as u64, 8)).unwrap();
                config.d0 = d0;
                let (partition, trace) = search_partition(&g, &est, &config).unwrap();
                let truth = BandPartition::from_cut_freqs(
                    setting.true_cuts(),
                    t_b,
                    est.grid().n_freq(),
                )
                .unwrap();
                let ri = rand_index(&partition, &truth, est.grid().n_freq()).unwrap();
                println!(
                    "rep {rep}: p_hat={} cuts={:?} rand={ri:.3} passes={} {:?}",
                    partition.n_bands(),
                    partition.cut_freqs(),
                    trace.passes.len(),
                    t0.elapsed()
                );
            }
        }
        "stat" => {
            // stationarity calibration on a white-noise band + power on linear
            let reps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
            let d0: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20_000);
            let (t_b, b, r) = (500usize, 10usize, 5usize);
            let k = tapers_for_bandwidth(0.05, t_b).unwrap();
            let t0 = Instant::now();
            let rejections: usize = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let x = simulate_fts(
                        SimSetting::WhiteNoise,
                        t_b * b,
                        r,
                        derive_seed(51, rep as u64, 0),
                    )
                    .unwrap();
                    let plan = make_block_plan(t_b * b, b).unwrap();
                    let est = multitaper_spectrum(&x, &plan, k).unwrap();
                    let g = demean_spectrum(&est).unwrap();
                    let tg = TestGrid::equally_spaced(r, 4).unwrap();
                    let res = stationarity_test(
                        &g,
                        &est,
                        0.1,
                        0.3,
                        d0,
                        &tg,
                        0.05,
                        derive_seed(52, rep as u64, 1),
                        true,
                        CovarianceModel::TaperWeighted,
                    )
                    .unwrap();
                    res.reject as usize
                })
                .sum();
            println!("white-noise band (0.1,0.3): {rejections}/{reps} rejections, {:?}", t0.elapsed());
            let power: usize = (0..20)
                .into_par_iter()
                .map(|rep| {
                    let x = simulate_fts(
                        SimSetting::Linear,
                        t_b * b,
                        r,
                        derive_seed(61, rep as u64, 0),
                    )
                    .unwrap();
                    let plan = make_block_plan(t_b * b, b).unwrap();
                    let est = multitaper_spectrum(&x, &plan, k).unwrap();
                    let g = demean_spectrum(&est).unwrap();
                    let tg = TestGrid::equally_spaced(r, 4).unwrap();
                    let res = stationarity_test(
                        &g,
                        &est,
                        0.0,
                        0.15,
                        d0,
                        &tg,
                        0.05,
                        derive_seed(62, rep as u64, 1),
                        true,
                        CovarianceModel::TaperWeighted,
                    )
                    .unwrap();
                    res.reject as usize
                })
                .sum();
            println!("linear band (0,0.15): {power}/20 rejections");
        }
        other => eprintln!("unknown mode {other}"),
    }
}
