//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the report is always printed; exits non-zero when a
//! criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use tsfm::augment::sampler::{dataset_stride, plan_sampler, series_windows, DEFAULT_N_MAX, DEFAULT_SERIES_CAP};
use tsfm::augment::{AugmentConfig, BatchBuilder};
use tsfm::corpus::{Dataset, Series};
use tsfm::harness::toy::{run_toy, toy_corpus, ToyConfig};
use tsfm::inference::{
    detect_seasonality, downsampled_forecast, flip_forecast, forecast, rollout, FlipMode, InferenceConfig,
    SeasonalNaive,
};
use tsfm::layers::params::{assign_flat, flatten, zeros_like};
use tsfm::layers::{ConvBlockParams, DecoderKind, DecoderParams, DeltaNetParams, MlpParams, Parameters};
use tsfm::model::{mae_loss, normalize, Batch, Checkpoint, MixerPattern, MixerVariant, Model, ModelConfig, Preset};
use tsfm::numerics::gradcheck::{max_rel_err, numeric_grad, FD_STEP};
use tsfm::numerics::{causal_conv_direct, causal_conv_fft, Tensor2};
use tsfm::rng::RngStream;
use tsfm::synthgen::{covariance, gp_samples, generate_corpus, ComposedKernel, KernelSpec, SynthConfig};
use tsfm::trainer::{overfit_batch, train, AdamWConfig, TrainConfig, TrainOptions};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_tensor(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Tensor2 {
    let data = (0..rows * cols).map(|_| scale * normal(rng)).collect();
    Tensor2::from_vec(rows, cols, data).unwrap()
}

fn randomize<P: Parameters>(p: &mut P, scale: f64, rng: &mut impl Rng) {
    p.visit_mut("", &mut |_, _, t| t.data_mut().iter_mut().for_each(|v| *v = scale * normal(rng)));
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

// ---------------------------------------------------------------- AC1

fn conv_oracle(x: &Tensor2, w: &Tensor2) -> Tensor2 {
    let (l, d) = x.shape();
    let mut z = Tensor2::zeros(l, d);
    for i in 0..l {
        for j in 0..d {
            let mut acc = 0.0;
            for m in 0..w.rows().min(i + 1) {
                acc += w.get(m, j) * x.get(i - m, j);
            }
            z.set(i, j, acc);
        }
    }
    z
}

/// LayerNorm with the variance floored at 1e-5.
fn layernorm_rows(x: &[Vec<f64>], gain: &[f64], bias: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|r| {
            let n = r.len() as f64;
            let m = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let s = var.max(1e-5).sqrt();
            r.iter().enumerate().map(|(j, v)| gain[j] * (v - m) / s + bias[j]).collect()
        })
        .collect()
}

/// The DeltaNet layer spelled out with explicit per-step matrices:
/// `S_i = S_{i-1} (I - beta k kᵀ) + beta v kᵀ`, everything in nested loops.
fn deltanet_oracle(p: &DeltaNetParams, x: &Tensor2, carry: &[f64]) -> Vec<Vec<f64>> {
    let (l, d) = x.shape();
    let h = p.n_heads;
    let dh = d / h;
    let mut xw: Vec<Vec<f64>> = (0..l).map(|i| x.row(i).to_vec()).collect();
    for j in 0..d {
        xw[0][j] += carry[j];
    }
    let project = |w: &Tensor2| -> Vec<Vec<f64>> {
        (0..l).map(|i| (0..w.cols()).map(|c| (0..d).map(|r| xw[i][r] * w.get(r, c)).sum()).collect()).collect()
    };
    let short = |a: &Vec<Vec<f64>>, w: &Tensor2| -> Vec<Vec<f64>> {
        (0..l)
            .map(|i| (0..d).map(|j| (0..w.rows().min(i + 1)).map(|m| w.get(m, j) * a[i - m][j]).sum()).collect())
            .collect()
    };
    let q = short(&project(&p.w_q), &p.conv_q);
    let k = short(&project(&p.w_k), &p.conv_k);
    let v = short(&project(&p.w_v), &p.conv_v);
    let logits = project(&p.w_beta);
    let alphas: Vec<f64> = match &p.decay_logit {
        Some(a) => a.data().iter().map(|z| 1.0 / (1.0 + (-z).exp())).collect(),
        None => vec![1.0; h],
    };
    let mut o = vec![vec![0.0; d]; l];
    for head in 0..h {
        let mut s = vec![vec![0.0; dh]; dh];
        for i in 0..l {
            let seg = |r: &Vec<f64>| r[head * dh..(head + 1) * dh].to_vec();
            let mut kk = seg(&k[i]);
            let norm = (kk.iter().map(|a| a * a).sum::<f64>() + 1e-12).sqrt();
            kk.iter_mut().for_each(|a| *a /= norm);
            let (vv, qq) = (seg(&v[i]), seg(&q[i]));
            let b = 1.0 / (1.0 + (-(logits[i][head] + p.b_beta.get(0, head))).exp());
            let mut trans = vec![vec![0.0; dh]; dh];
            for r in 0..dh {
                for c in 0..dh {
                    trans[r][c] = f64::from(u8::from(r == c)) - b * kk[r] * kk[c];
                }
            }
            let mut next = vec![vec![0.0; dh]; dh];
            for r in 0..dh {
                for c in 0..dh {
                    let mut acc = b * vv[r] * kk[c];
                    for m in 0..dh {
                        acc += alphas[head] * s[r][m] * trans[m][c];
                    }
                    next[r][c] = acc;
                }
            }
            s = next;
            for r in 0..dh {
                o[i][head * dh + r] = (0..dh).map(|c| s[r][c] * qq[c]).sum();
            }
        }
    }
    let normed = layernorm_rows(&o, p.ln_gain.data(), p.ln_bias.data());
    (0..l).map(|i| (0..d).map(|j| xw[i][j] + normed[i][j]).collect()).collect()
}

fn ac1() -> Verdict {
    let mut rng = RngStream::new(101).rng();
    let mut conv_err: f64 = 0.0;
    for _ in 0..100 {
        let l = rng.random_range(1..=256);
        let d = rng.random_range(1..=16);
        let x = random_tensor(l, d, 1.0, &mut rng);
        let w = random_tensor(l, d, 1.0, &mut rng);
        let fft = causal_conv_fft(&x, &w).unwrap();
        conv_err = conv_err.max(fft.max_abs_diff(&conv_oracle(&x, &w)));
        conv_err = conv_err.max(fft.max_abs_diff(&causal_conv_direct(&x, &w).unwrap()));
    }
    let mut dn_err: f64 = 0.0;
    for i in 0..50 {
        let l = rng.random_range(4..=16);
        let d = 4 * rng.random_range(1..=2);
        let mut p = DeltaNetParams::zeros(d, 3, i % 2 == 1).unwrap();
        randomize(&mut p, 0.5, &mut rng);
        let x = random_tensor(l, d, 1.0, &mut rng);
        let carry: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let (out, _, _) = p.forward(&x, &carry).unwrap();
        let want = deltanet_oracle(&p, &x, &carry);
        for (r, row) in want.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                dn_err = dn_err.max((out.get(r, c) - v).abs());
            }
        }
    }
    verdict(conv_err < 1e-9 && dn_err < 1e-10, format!("fft conv max err {conv_err:.2e} (< 1e-9), deltanet max err {dn_err:.2e} (< 1e-10)"))
}

// ---------------------------------------------------------------- AC2

/// FD check of `theta -> sum(r * layer(theta))` against the analytic
/// gradient; returns the max relative error.
fn check_params<P: Parameters + Clone>(p: &P, analytic: &P, out: impl Fn(&P) -> Vec<f64>, r: &[f64]) -> f64 {
    let theta = flatten(p);
    let f = |t: &[f64]| {
        let mut q = p.clone();
        assign_flat(&mut q, t);
        out(&q).iter().zip(r).map(|(a, b)| a * b).sum::<f64>()
    };
    max_rel_err(&flatten(analytic), &numeric_grad(f, &theta, FD_STEP))
}

fn check_input(x: &Tensor2, analytic: &Tensor2, out: impl Fn(&Tensor2) -> Vec<f64>, r: &[f64]) -> f64 {
    let f = |t: &[f64]| {
        let xt = Tensor2::from_vec(x.rows(), x.cols(), t.to_vec()).unwrap();
        out(&xt).iter().zip(r).map(|(a, b)| a * b).sum::<f64>()
    };
    max_rel_err(analytic.data(), &numeric_grad(f, x.data(), FD_STEP))
}

fn ac2() -> Verdict {
    let mut rng = RngStream::new(202).rng();
    let (l, d, p) = (12, 8, 4);
    let mut errs: Vec<(&str, f64)> = Vec::new();
    let x = random_tensor(l, d, 1.0, &mut rng);
    let r: Vec<f64> = (0..l * d).map(|_| normal(&mut rng)).collect();
    let dout = Tensor2::from_vec(l, d, r.clone()).unwrap();

    let mut conv = ConvBlockParams::zeros(l, d, 3);
    randomize(&mut conv, 0.5, &mut rng);
    let (_, cache) = conv.forward(&x).unwrap();
    let mut g = zeros_like(&conv);
    let dx = conv.backward(&cache, &dout, &mut g);
    let e = check_params(&conv, &g, |q| q.forward(&x).unwrap().0.into_vec(), &r)
        .max(check_input(&x, &dx, |xt| conv.forward(xt).unwrap().0.into_vec(), &r));
    errs.push(("conv block", e));

    for gated in [false, true] {
        let mut dn = DeltaNetParams::zeros(d, 3, gated).unwrap();
        randomize(&mut dn, 0.5, &mut rng);
        let carry: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let (_, _, cache) = dn.forward(&x, &carry).unwrap();
        let mut g = zeros_like(&dn);
        let (dx, _) = dn.backward(&cache, &dout, &mut g);
        let e = check_params(&dn, &g, |q| q.forward(&x, &carry).unwrap().0.into_vec(), &r)
            .max(check_input(&x, &dx, |xt| dn.forward(xt, &carry).unwrap().0.into_vec(), &r));
        errs.push((if gated { "gated deltanet" } else { "deltanet" }, e));
    }

    let mut mlp = MlpParams::zeros(d);
    randomize(&mut mlp, 0.5, &mut rng);
    let (_, cache) = mlp.forward(&x).unwrap();
    let mut g = zeros_like(&mlp);
    let dx = mlp.backward(&cache, &dout, &mut g);
    let e = check_params(&mlp, &g, |q| q.forward(&x).unwrap().0.into_vec(), &r)
        .max(check_input(&x, &dx, |xt| mlp.forward(xt).unwrap().0.into_vec(), &r));
    errs.push(("mlp", e));

    for (kind, posemb) in [(DecoderKind::Attention, false), (DecoderKind::Attention, true), (DecoderKind::Bilinear, false)] {
        let mut dec = DecoderParams::zeros(kind, l, p, d, posemb);
        randomize(&mut dec, 0.5, &mut rng);
        let ry: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
        let (_, cache) = dec.forward(&x).unwrap();
        let mut g = zeros_like(&dec);
        let dx = dec.backward(&cache, &ry, &mut g);
        let e = check_params(&dec, &g, |q| q.forward(&x).unwrap().0, &ry)
            .max(check_input(&x, &dx, |xt| dec.forward(xt).unwrap().0, &ry));
        errs.push(("decoder", e));
    }

    // embedding (and everything else) through the full model and loss
    let mut cfg = ModelConfig::preset(Preset::Nano).with_context(l, p);
    cfg.dim = d;
    let mut model = Model::init(&cfg, RngStream::new(5)).unwrap();
    randomize(&mut model, 0.3, &mut rng);
    let batch = random_batch(2, l, p, &mut rng);
    let (_, grads) = model.loss_and_grad(&batch).unwrap();
    let theta = flatten(&model);
    let f = |t: &[f64]| {
        let mut m = model.clone();
        assign_flat(&mut m, t);
        m.loss(&batch).unwrap()
    };
    let numeric = numeric_grad(f, &theta, FD_STEP);
    let analytic = flatten(&grads);
    let embed = 2 * d;
    errs.push(("embedding", max_rel_err(&analytic[..embed], &numeric[..embed])));
    errs.push(("full model", max_rel_err(&analytic, &numeric)));

    let pred: Vec<f64> = (0..10).map(|_| normal(&mut rng)).collect();
    let target: Vec<f64> = (0..10).map(|_| normal(&mut rng)).collect();
    let mask: Vec<bool> = (0..10).map(|i| i % 3 != 0).collect();
    let (_, dpred) = mae_loss(&pred, &target, &mask).unwrap();
    let f = |t: &[f64]| mae_loss(t, &target, &mask).unwrap().0;
    errs.push(("loss", max_rel_err(&dpred, &numeric_grad(f, &pred, FD_STEP))));

    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let detail = errs.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    verdict(worst < 1e-4, format!("max rel err {worst:.2e} (< 1e-4): {detail}"))
}

fn random_batch(b: usize, l: usize, p: usize, rng: &mut impl Rng) -> Batch {
    let mut context = Vec::new();
    let mut target = Vec::new();
    let mut stats = Vec::new();
    for _ in 0..b {
        let raw: Vec<f64> = (0..l).map(|_| 3.0 + normal(rng)).collect();
        let (n, s) = normalize(&raw).unwrap();
        context.extend(n);
        target.extend((0..p).map(|_| 3.0 + normal(rng)));
        stats.push(s);
    }
    Batch {
        context: Tensor2::from_vec(b, l, context).unwrap(),
        target: Tensor2::from_vec(b, p, target).unwrap(),
        target_mask: (0..b * p).map(|i| i % 5 != 4).collect(),
        stats,
    }
}

// ---------------------------------------------------------------- AC3

fn ac3() -> Verdict {
    let mut rng = RngStream::new(303).rng();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let mut cfg = ModelConfig::preset(Preset::Nano).with_context(32, 8);
        cfg.dim = 8;
        cfg.decoder = if i % 2 == 0 { DecoderKind::Attention } else { DecoderKind::Bilinear };
        let mut model = Model::init(&cfg, RngStream::new(1000 + i)).unwrap();
        randomize(&mut model, 0.3, &mut rng);
        let len = rng.random_range(8..48);
        let x: Vec<f64> = (0..len).map(|_| 2.0 * normal(&mut rng) + 1.0).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        for mode in [FlipMode::Once, FlipMode::Every] {
            let a = flip_forecast(&model, &x, 20, mode).unwrap();
            let b = flip_forecast(&model, &neg, 20, mode).unwrap();
            worst = a.iter().zip(&b).map(|(u, v)| (u + v).abs()).fold(worst, f64::max);
        }
    }
    verdict(worst < 1e-9, format!("max |G(x) + G(-x)| {worst:.2e} (< 1e-9) over 100 models, once and every"))
}

// ---------------------------------------------------------------- AC4

fn ac4() -> Verdict {
    let cfg = InferenceConfig { alpha: 2.0, beta: 4.0, min_periods: 8, ..Default::default() };
    let sine: Vec<f64> = (0..8192).map(|t| (2.0 * PI * t as f64 / 4000.0).sin()).collect();
    let r = detect_seasonality(&sine, 2048, &cfg).unwrap();
    let sine_ok = r.significant && (r.period - 4000.0).abs() <= 80.0 && r.stride == 15;

    let mut rejected = 0;
    for seed in 0..100 {
        let mut rng = RngStream::new(seed).named("white-noise").rng();
        let noise: Vec<f64> = (0..8192).map(|_| normal(&mut rng)).collect();
        rejected += usize::from(!detect_seasonality(&noise, 2048, &cfg).unwrap().significant);
    }
    let ramp: Vec<f64> = (0..8192).map(|t| t as f64).collect();
    let rr = detect_seasonality(&ramp, 2048, &cfg).unwrap();
    let ramp_ok = !rr.significant && !rr.above_trend;
    verdict(
        sine_ok && rejected >= 99 && ramp_ok,
        format!(
            "sine: significant {}, S {:.1} (4000 ± 2%), k {} (15); noise rejected {rejected}/100 (>= 99); ramp rejected by DC gate {ramp_ok}",
            r.significant, r.period, r.stride
        ),
    )
}

// ---------------------------------------------------------------- AC5

fn ac5() -> Verdict {
    let n = 256;
    let period_pts = 32.0;
    let kernel = ComposedKernel::single(KernelSpec::Periodic { period: period_pts / (n - 1) as f64 });
    let mut rng = RngStream::new(505).rng();
    let draws = gp_samples(&kernel, &vec![0.0; n], 100, &mut rng).unwrap();
    let mut power = vec![0.0; n / 2 + 1];
    for x in &draws {
        for (pw, z) in power.iter_mut().zip(tsfm::numerics::dft(x)) {
            *pw += z.norm_sqr() / draws.len() as f64;
        }
    }
    let peak = (1..=n / 2).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
    let want = n as f64 / period_pts;
    let peak_ok = (peak as f64 - want).abs() <= 1.0;

    let l = 16;
    let rbf = ComposedKernel::single(KernelSpec::Rbf { l: 1.0 });
    let sigma = covariance(&rbf, l);
    let samples = gp_samples(&rbf, &vec![0.0; l], 10_000, &mut rng).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..l {
        for j in 0..l {
            let emp = samples.iter().map(|s| s[i] * s[j]).sum::<f64>() / samples.len() as f64;
            worst = worst.max((emp - sigma[i * l + j]).abs() / sigma[i * l + j].abs());
        }
    }
    verdict(
        peak_ok && worst < 0.05,
        format!("periodogram peak bin {peak} (want {want} ± 1); RBF covariance max rel err {:.2}% (< 5%)", 100.0 * worst),
    )
}

// ---------------------------------------------------------------- AC6

fn ac6() -> Verdict {
    let s1 = dataset_stride(1_000_000, DEFAULT_N_MAX);
    let s2 = dataset_stride(50_000, DEFAULT_N_MAX);
    let w = series_windows(10_000, 100, DEFAULT_SERIES_CAP);
    let plan = plan_sampler(&[("a".into(), vec![100_000; 10])], DEFAULT_N_MAX, DEFAULT_SERIES_CAP).unwrap();
    let planned = plan.datasets[0].stride;
    verdict(
        s1 == 10 && s2 == 1 && w == 48 && planned == 10,
        format!("s_D(1e6) = {s1} (10), s_D(5e4) = {s2} (1), windows(10000, s_D 100) = {w} (48), planned stride {planned} (10)"),
    )
}

// ---------------------------------------------------------------- AC7

fn ac7() -> Verdict {
    let cfg = ToyConfig::default();

    // overfit-one-batch on a fresh model
    let data = toy_corpus(&cfg, RngStream::new(7).named("overfit"), 8, 8);
    let mc = &cfg.train.model;
    let lists: Vec<(String, Vec<usize>)> =
        data.iter().map(|d| (d.id.clone(), d.series.iter().map(|s| s.len()).collect())).collect();
    let plan = plan_sampler(&lists, DEFAULT_N_MAX, DEFAULT_SERIES_CAP).unwrap();
    let builder =
        BatchBuilder::new(&data, plan, AugmentConfig::disabled(), RngStream::new(8), 8, mc.context, mc.patch).unwrap();
    let batch = builder.batch(0).unwrap();
    let mut model = Model::init(mc, RngStream::new(9)).unwrap();
    let losses = overfit_batch(&mut model, &batch, 50, 1e-3, &AdamWConfig::default()).unwrap();
    let rises: Vec<usize> = losses.windows(2).enumerate().filter(|(_, w)| w[1] >= w[0]).map(|(i, _)| i + 1).collect();
    let monotone = rises.is_empty();

    let start = Instant::now();
    let out = run_toy(&cfg, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let fams = out.report.families.iter().map(|f| format!("{} {:.3}", f.family, f.mase)).collect::<Vec<_>>().join(", ");
    let first = out.log.first().map_or(f64::NAN, |r| r.loss);
    let tail = &out.log[out.log.len().saturating_sub(3)..];
    let last = tail.iter().map(|r| r.loss).sum::<f64>() / tail.len().max(1) as f64;
    verdict(
        out.report.mase < 0.5 && monotone && secs < 900.0 && cfg.train.steps <= 2000,
        format!(
            "held-out MASE {:.3} (< 0.5) [{fams}] after {} steps in {secs:.0} s (< 900); train loss {first:.3} -> {last:.3}; overfit 50 steps strictly decreasing {monotone} ({:.4} -> {:.4}, rises at steps {rises:?})",
            out.report.mase,
            cfg.train.steps,
            losses[0],
            losses[losses.len() - 1]
        ),
    )
}

// ---------------------------------------------------------------- AC8

/// Symmetric trapezoid between -1 and 1; zero mean, so the DC gate passes.
fn trapezoid_wave(len: usize, period: usize) -> Vec<f64> {
    let (rise, high, fall) = (period / 8, 3 * period / 8, period / 8);
    (0..len)
        .map(|t| {
            let ph = t % period;
            if ph < rise {
                2.0 * ph as f64 / rise as f64 - 1.0
            } else if ph < rise + high {
                1.0
            } else if ph < rise + high + fall {
                1.0 - 2.0 * (ph - rise - high) as f64 / fall as f64
            } else {
                -1.0
            }
        })
        .collect()
}

fn ac8() -> Verdict {
    let (l, horizon) = (2048, 720);
    let series = trapezoid_wave(8192 + horizon, 4000);
    let (hist, actual) = series.split_at(8192);
    let naive = SeasonalNaive { period: None, context: l, patch: 48 };
    let on = InferenceConfig { downsample: true, short_horizon_ratio: 0.0, ..Default::default() };
    let off = InferenceConfig { downsample: false, ..Default::default() };
    let f_on = forecast(&naive, l, hist, horizon, &on, None).unwrap();
    let f_off = forecast(&naive, l, hist, horizon, &off, None).unwrap();
    let mae = |f: &[f64]| f.iter().zip(actual).map(|(a, b)| (a - b).abs()).sum::<f64>() / horizon as f64;
    let (m_on, m_off) = (mae(&f_on.values), mae(&f_off.values));

    let plain = rollout(&naive, hist, horizon).unwrap();
    let k1 = downsampled_forecast(&naive, hist, horizon, 1, FlipMode::None).unwrap();
    let forced = forecast(&naive, l, hist, horizon, &on, Some(1)).unwrap();
    let identical = plain.iter().zip(&k1).chain(plain.iter().zip(&forced.values)).all(|(a, b)| a.to_bits() == b.to_bits());
    verdict(
        m_on < m_off && identical,
        format!("MAE downsampled (k = {}) {m_on:.4} < plain {m_off:.4}; k = 1 bit-identical to rollout {identical}", f_on.stride),
    )
}

// ---------------------------------------------------------------- AC9

fn ac9() -> Verdict {
    let synth = SynthConfig { length: 256, count: 24, seed: 99, ..Default::default() };
    let corpora: Vec<Vec<Series>> = [1, 4].iter().map(|&t| pool(t).install(|| generate_corpus(&synth).unwrap())).collect();
    let corpus_same = corpora[0] == corpora[1];

    let data = vec![Dataset::new("synth", corpora[0].clone())];
    let lists = vec![("synth".to_string(), data[0].series.iter().map(|s| s.len()).collect())];
    let batches: Vec<Vec<Batch>> = [1, 4]
        .iter()
        .map(|&t| {
            pool(t).install(|| {
                let plan = plan_sampler(&lists, DEFAULT_N_MAX, DEFAULT_SERIES_CAP).unwrap();
                let b = BatchBuilder::new(&data, plan, AugmentConfig::default(), RngStream::new(3), 8, 64, 16).unwrap();
                (0..4).map(|s| b.batch(s).unwrap()).collect()
            })
        })
        .collect();
    let bits = |b: &Batch| -> Vec<u64> {
        b.context.data().iter().chain(b.target.data()).map(|v| v.to_bits()).collect()
    };
    let batches_same = batches[0].iter().zip(&batches[1]).all(|(a, b)| bits(a) == bits(b) && a.target_mask == b.target_mask);

    let mut model = ModelConfig::preset(Preset::Nano).with_context(64, 16);
    model.dim = 8;
    let tc = TrainConfig { model, steps: 8, batch_size: 6, log_every: 1, ..Default::default() };
    let ckpts: Vec<Vec<u8>> = [1, 4]
        .iter()
        .map(|&t| pool(t).install(|| train(&tc, &data, TrainOptions::default()).unwrap().checkpoint.to_bytes().unwrap()))
        .collect();
    let ckpt_same = ckpts[0] == ckpts[1];

    let full = train(&tc, &data, TrainOptions::default()).unwrap();
    let half = train(&tc, &data, TrainOptions { stop_at: Some(4), ..Default::default() }).unwrap();
    let bytes = half.checkpoint.to_bytes().unwrap();
    let resumed = Checkpoint::from_bytes(&bytes).unwrap();
    let rest = train(&tc, &data, TrainOptions { resume: Some(resumed), ..Default::default() }).unwrap();
    let resume_same = full.log[4..].len() == rest.log.len()
        && full.log[4..].iter().zip(&rest.log).all(|(a, b)| a.loss.to_bits() == b.loss.to_bits());
    verdict(
        corpus_same && batches_same && ckpt_same && resume_same,
        format!("1 vs 4 threads: corpus {corpus_same}, batches {batches_same}, checkpoint {ckpt_same}; resumed losses bitwise {resume_same}"),
    )
}

// ---------------------------------------------------------------- AC10

fn tiny_toy() -> ToyConfig {
    let mut cfg = ToyConfig::default();
    cfg.train.model = cfg.train.model.clone().with_context(64, 8);
    cfg.train.model.dim = 8;
    cfg.train.steps = 3;
    cfg.train.batch_size = 4;
    // the full toy trains unaugmented; ablations start from the full pipeline
    cfg.train.augment = AugmentConfig::default();
    cfg.n_sine = 6;
    cfg.n_tsi = 6;
    cfg.n_eval = 3;
    cfg.length = 200;
    cfg.horizon = 16;
    cfg
}

fn ac10() -> Verdict {
    let mut variants: Vec<(String, ToyConfig)> = Vec::new();
    for v in [MixerVariant::Deltanet, MixerVariant::GatedDeltanet] {
        let mut c = tiny_toy();
        c.train.model.mixer_variant = v;
        variants.push((format!("mixer {v:?}"), c));
    }
    for p in [MixerPattern::Alternating, MixerPattern::ConvOnly, MixerPattern::DeltanetOnly] {
        let mut c = tiny_toy();
        c.train.model.mixer_pattern = p;
        variants.push((format!("pattern {p:?}"), c));
    }
    for d in [DecoderKind::Attention, DecoderKind::Bilinear] {
        let mut c = tiny_toy();
        c.train.model.decoder = d;
        variants.push((format!("decoder {d:?}"), c));
    }
    type Toggle = fn(&mut AugmentConfig);
    let stages: [(&str, Toggle); 6] = [
        ("downsample", |a| a.enable_downsample = false),
        ("modulate", |a| a.enable_modulate = false),
        ("flip_x", |a| a.enable_flip_x = false),
        ("flip_y", |a| a.enable_flip_y = false),
        ("censor", |a| a.enable_censor = false),
        ("mixup", |a| a.enable_mixup = false),
    ];
    for (name, off) in stages {
        let mut c = tiny_toy();
        off(&mut c.train.augment);
        variants.push((format!("no {name}"), c));
    }
    for flip in [FlipMode::None, FlipMode::Once, FlipMode::Every] {
        for downsample in [false, true] {
            let mut c = tiny_toy();
            c.inference.flip = flip;
            c.inference.downsample = downsample;
            variants.push((format!("flip {flip:?} downsample {downsample}"), c));
        }
    }
    let failed: Vec<String> = variants
        .iter()
        .filter(|(_, c)| !run_toy(c, None).is_ok_and(|o| o.report.mase.is_finite()))
        .map(|(n, _)| n.clone())
        .collect();
    verdict(failed.is_empty(), format!("{} toggles trained and scored end to end; failed: {failed:?}", variants.len()))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1 numerical equivalence", ac1),
        ("AC2 gradient checks", ac2),
        ("AC3 flip equivariance", ac3),
        ("AC4 seasonality detection", ac4),
        ("AC5 generator statistics", ac5),
        ("AC6 sampler arithmetic", ac6),
        ("AC7 toy training", ac7),
        ("AC8 downsampled forecast", ac8),
        ("AC9 determinism", ac9),
        ("AC10 ablation switches", ac10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.split(' ').next() == Some(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        failures += usize::from(!v.pass);
        println!(
            "{} {name} ({:.1} s): {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
