use mnar_core::mcmc::{run_chains, split_rhat, Block, BlockTarget, InitStrategy, McmcConfig, RHat};
use mnar_core::stats::{mean, variance};

/// Independent Gaussians, one block per coordinate.
struct Gaussian {
    mu: Vec<f64>,
    sd: Vec<f64>,
    joint: bool,
}

impl BlockTarget for Gaussian {
    fn dim(&self) -> usize {
        self.mu.len()
    }
    fn blocks(&self) -> Vec<Block> {
        if self.joint {
            vec![Block {
                name: "all".into(),
                indices: (0..self.dim()).collect(),
            }]
        } else {
            (0..self.dim())
                .map(|i| Block {
                    name: format!("x{i}"),
                    indices: vec![i],
                })
                .collect()
        }
    }
    fn block_log_density(&self, block: usize, x: &[f64]) -> f64 {
        let term = |i: usize| {
            let z = (x[i] - self.mu[i]) / self.sd[i];
            -0.5 * z * z
        };
        if self.joint {
            (0..self.dim()).map(term).sum()
        } else {
            term(block)
        }
    }
}

/// 0.3 N(-2, 0.5²) + 0.7 N(1.5, 1).
struct Mixture;

fn mixture_density(x: f64) -> f64 {
    let n = |x: f64, m: f64, s: f64| (-(x - m) * (x - m) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    0.3 * n(x, -2.0, 0.5) + 0.7 * n(x, 1.5, 1.0)
}

impl BlockTarget for Mixture {
    fn dim(&self) -> usize {
        1
    }
    fn blocks(&self) -> Vec<Block> {
        vec![Block {
            name: "x".into(),
            indices: vec![0],
        }]
    }
    fn block_log_density(&self, _block: usize, x: &[f64]) -> f64 {
        mixture_density(x[0]).ln()
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn config(chains: usize, iterations: usize, burn: usize, thin: usize, seed: u64) -> McmcConfig {
    McmcConfig {
        n_chains: chains,
        iterations,
        burn_in: burn,
        thinning: thin,
        seed,
        ..McmcConfig::desk()
    }
}

#[test]
fn standard_normal_moments_and_rhat() {
    for joint in [false, true] {
        let t = Gaussian {
            mu: vec![0.0; 3],
            sd: vec![1.0; 3],
            joint,
        };
        let init = InitStrategy::Jittered {
            center: vec![0.0; 3],
            scale: 2.0,
        };
        let run = run_chains(&t, &init, &config(4, 25_000, 5_000, 1, 7)).unwrap();
        assert_eq!(run.draws.n_draws(), 80_000);
        for j in 0..3 {
            let col = run.draws.column(j);
            let m = mean(&col);
            let v = variance(&col);
            assert!(m.abs() < 0.05, "joint={joint} mean {j} = {m}");
            assert!((v - 1.0).abs() < 0.1, "joint={joint} var {j} = {v}");
            let r = split_rhat(&run.draws.chains_of(j)).value().unwrap();
            assert!(r < 1.02, "joint={joint} rhat {r}");
        }
        for s in &run.chains {
            for &a in &s.block_acceptance {
                assert!((0.1..0.7).contains(&a), "acceptance {a}");
            }
        }
    }
}

#[test]
fn near_point_mass() {
    let t = Gaussian {
        mu: vec![3.0],
        sd: vec![1e-3],
        joint: false,
    };
    let run = run_chains(&t, &InitStrategy::Fixed(vec![3.0]), &config(2, 20_000, 5_000, 5, 3)).unwrap();
    let col = run.draws.column(0);
    let sd = variance(&col).sqrt();
    assert!((mean(&col) - 3.0).abs() < 2e-4);
    assert!((sd - 1e-3).abs() < 2e-4, "sd {sd}");
}

#[test]
fn mixture_histogram_matches_density() {
    let run = run_chains(
        &Mixture,
        &InitStrategy::Jittered {
            center: vec![0.0],
            scale: 2.0,
        },
        &config(4, 205_000, 5_000, 40, 11),
    )
    .unwrap();
    let xs = run.draws.column(0);
    let n = xs.len() as f64;
    let edges: Vec<f64> = (0..=16).map(|k| -3.5 + 0.5 * k as f64).collect();
    let mut chi2 = 0.0;
    let mut cells = 0;
    let mut edges_all = vec![f64::NEG_INFINITY];
    edges_all.extend(&edges);
    edges_all.push(f64::INFINITY);
    for w in edges_all.windows(2) {
        let (lo, hi) = (w[0].max(-12.0), w[1].min(12.0));
        let p = simpson(&mixture_density, lo, hi, 2000);
        let observed = xs.iter().filter(|&&x| x >= w[0] && x < w[1]).count() as f64;
        let expected = n * p;
        chi2 += (observed - expected).powi(2) / expected;
        cells += 1;
    }
    // 17 degrees of freedom: the 0.999 quantile is 40.8
    assert_eq!(cells, 18);
    assert!(chi2 < 40.8, "chi-square {chi2}");
}

#[test]
fn same_seed_same_draws_regardless_of_threads() {
    let t = Gaussian {
        mu: vec![1.0, -1.0],
        sd: vec![0.5, 2.0],
        joint: true,
    };
    let init = InitStrategy::Jittered {
        center: vec![0.0, 0.0],
        scale: 1.0,
    };
    let cfg = config(3, 3_000, 1_000, 4, 99);
    let a = run_chains(&t, &init, &cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| run_chains(&t, &init, &cfg).unwrap());
    assert_eq!(a.draws, b.draws);
    let c = run_chains(&t, &init, &cfg.clone().with_seed(100)).unwrap();
    assert_ne!(a.draws, c.draws);
}

#[test]
fn separated_chains_fail_rhat() {
    // one chain stuck at each of two far-apart Gaussians
    let lo = Gaussian {
        mu: vec![0.0],
        sd: vec![1.0],
        joint: false,
    };
    let hi = Gaussian {
        mu: vec![10.0],
        sd: vec![1.0],
        joint: false,
    };
    let cfg = config(1, 6_000, 1_000, 5, 5);
    let a = run_chains(&lo, &InitStrategy::Fixed(vec![0.0]), &cfg).unwrap();
    let b = run_chains(&hi, &InitStrategy::Fixed(vec![10.0]), &cfg.with_seed(6)).unwrap();
    let r = split_rhat(&[a.draws.column(0), b.draws.column(0)]);
    match r {
        RHat::Value(v) => assert!(v > 1.5, "rhat {v}"),
        RHat::Degenerate => panic!("unexpected degenerate"),
    }
}

#[test]
fn infeasible_start_is_rejected() {
    struct Positive;
    impl BlockTarget for Positive {
        fn dim(&self) -> usize {
            1
        }
        fn blocks(&self) -> Vec<Block> {
            vec![Block {
                name: "x".into(),
                indices: vec![0],
            }]
        }
        fn block_log_density(&self, _b: usize, x: &[f64]) -> f64 {
            if x[0] > 0.0 {
                -x[0]
            } else {
                f64::NEG_INFINITY
            }
        }
    }
    let err = run_chains(&Positive, &InitStrategy::Fixed(vec![-1.0]), &config(2, 100, 50, 1, 1)).unwrap_err();
    assert!(err.to_string().contains('x'), "{err}");
}
