//! Invariants checked over randomized kernels, prefixes and distributions.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

use toeplitz_fixpoint::classifier::{classify, find_root_in_unit_interval, limit_value_n1, Regime};
use toeplitz_fixpoint::coefficients::{check_root_convexity, ConvexityStatus};
use toeplitz_fixpoint::genfun::{chi_closed_form, chi_closed_form_n1};
use toeplitz_fixpoint::number::{Number, Values};
use toeplitz_fixpoint::recurrence::{positivity_scan, row_residuals, solve_forward, uniform_prefix, Prefix, SolutionTrace};
use toeplitz_fixpoint::stochastic::{step_dist, step_kernel, takacs_dp, two_seq_dp, DiscreteDist};
use toeplitz_fixpoint::ToeplitzKernel;

fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(d))
}

/// Integer weights with a positive head, scaled by `num / den` of their sum.
fn weighted(weights: &[i64], num: i64, den: i64) -> Vec<BigRational> {
    let total: i64 = weights.iter().sum();
    weights.iter().map(|&w| q(w * num, total * den)).collect()
}

fn weights(max_len: usize) -> impl Strategy<Value = Vec<i64>> {
    (1i64..=10, prop::collection::vec(0i64..=10, 0..max_len))
        .prop_map(|(head, tail)| std::iter::once(head).chain(tail).collect())
}

fn exact_kernel(n: usize, coeffs: Vec<BigRational>) -> ToeplitzKernel {
    ToeplitzKernel::from_rationals(n, coeffs).unwrap()
}

fn exact_prefix(values: &[i64]) -> Prefix {
    Prefix::exact(values.iter().map(|&v| q(v, 3)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exact_trace_solves_every_computed_row(
        n in 1usize..=3,
        w in weights(5),
        scale in 1i64..=6,
        seeds in prop::collection::vec(1i64..=9, 3),
    ) {
        let k = exact_kernel(n, weighted(&w, scale, 4));
        let trace = solve_forward(&k, &exact_prefix(&seeds[..n]), 40).unwrap();
        let Values::Exact(r) = row_residuals(&k, &trace).unwrap() else { unreachable!() };
        prop_assert!(r.iter().all(Zero::is_zero));
    }

    #[test]
    fn float_trace_tracks_exact_trace(
        n in 1usize..=2,
        w in weights(4),
        seeds in prop::collection::vec(1i64..=9, 2),
    ) {
        let exact = exact_kernel(n, weighted(&w, 1, 1));
        prop_assume!(exact.leading().to_f64() >= 0.3);
        let float = exact.to_kind(toeplitz_fixpoint::ValueKind::Float).unwrap();
        let p = exact_prefix(&seeds[..n]);
        let a = solve_forward(&exact, &p, 30).unwrap().to_f64_vec();
        let b = solve_forward(&float, &p.to_kind(toeplitz_fixpoint::ValueKind::Float).unwrap(), 30).unwrap().to_f64_vec();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    /// With one free value and mass at most 1 the uniform-prefix solution
    /// never decreases.
    #[test]
    fn band_one_solution_is_monotone(w in weights(5), num in 1i64..=4) {
        let k = exact_kernel(1, weighted(&w, num, 4));
        let trace = solve_forward(&k, &uniform_prefix(&k, &Number::Exact(q(1, 1))).unwrap(), 60).unwrap();
        let scan = positivity_scan(&trace, &k).unwrap();
        prop_assert!(scan.all_positive);
        prop_assert_eq!(scan.monotone_nondecreasing_from, Some(0));
    }

    /// Each running maximum is overtaken within `n` steps while the row that
    /// forces it has been computed.
    #[test]
    fn running_maximum_advances_within_band(
        n in 1usize..=3,
        w in weights(6),
        num in 1i64..=4,
        seeds in prop::collection::vec(1i64..=9, 3),
    ) {
        let k = exact_kernel(n, weighted(&w, num, 4));
        let trace = solve_forward(&k, &exact_prefix(&seeds[..n]), 60).unwrap();
        let scan = positivity_scan(&trace, &k).unwrap();
        if let Some(ok) = scan.chain_gap_within_band {
            prop_assert!(ok, "{:?}", scan);
        }
    }

    /// Scaling the leading term of a critical three-term kernel keeps the
    /// solution positive when the characteristic roots are real.
    #[test]
    fn scaled_three_term_kernel_stays_positive(
        w in (1i64..=10, 0i64..=10, 0i64..=10),
        c in 3i64..=8,
    ) {
        let base = weighted(&[w.0, w.1, w.2], 1, 1);
        let disc = (BigRational::from_integer(1.into()) - &base[1]).pow(2)
            - q(4 * c, 2) * &base[0] * &base[2];
        prop_assume!(disc >= BigRational::zero());
        let critical = exact_kernel(1, base);
        let k = toeplitz_fixpoint::recurrence::scaled_kernel(&critical, &Number::Exact(q(c, 2))).unwrap();
        prop_assume!(k.mass().to_f64() > 1.0);
        let trace = solve_forward(&k, &uniform_prefix(&k, &Number::Exact(q(1, 1))).unwrap(), 200).unwrap();
        prop_assert!(positivity_scan(&trace, &k).unwrap().all_positive);
    }

    #[test]
    fn every_decidable_kernel_gets_one_regime(n in 1usize..=3, c in prop::collection::vec(0.0f64..1.0, 1..6)) {
        let mut c = c;
        c[0] += 0.01;
        let k = ToeplitzKernel::from_f64(n, &c, 0.0).unwrap();
        let r = classify(&k, 1e-12).unwrap();
        let mass = k.mass().to_f64();
        let expected = if mass > 1.0 + 1e-12 {
            Regime::Supercritical
        } else if mass < 1.0 - 1e-12 {
            Regime::Subcritical
        } else {
            match k.compare_moment_to_band(1e-12) {
                Ordering::Less => Regime::CriticalBounded,
                Ordering::Equal => Regime::CriticalDivergentEqual,
                Ordering::Greater => Regime::CriticalDivergentHeavy,
            }
        };
        prop_assert_eq!(r.regime, expected);
        if r.convexity.satisfied == ConvexityStatus::Pass {
            prop_assert_eq!(r.bounded, Some(expected.is_bounded()));
        } else {
            prop_assert_eq!(r.bounded, None);
        }
    }

    /// For critical kernels the root in (0, 1) exists exactly when the first
    /// moment exceeds the band depth; below the critical scale it always
    /// exists, and above it never does when the moment is at most `n`.
    #[test]
    fn root_existence_follows_the_moment(n in 1usize..=2, w in weights(6), scale in 0.5f64..0.95) {
        let coeffs: Vec<f64> = weighted(&w, 1, 1).iter().map(|r| Number::Exact(r.clone()).to_f64()).collect();
        let k = ToeplitzKernel::from_f64(n, &coeffs, 0.0).unwrap();
        let conv = check_root_convexity(&k, 1001, 1e-9).unwrap();
        prop_assume!(conv.satisfied == ConvexityStatus::Pass);
        let gamma = k.first_moment().to_f64();
        prop_assume!((gamma - n as f64).abs() > 0.02);
        let tol = 1e-11;
        let critical = find_root_in_unit_interval(&k, 1.0, tol).unwrap();
        prop_assert_eq!(critical.root_exists, gamma > n as f64);
        prop_assert!(find_root_in_unit_interval(&k, scale, tol).unwrap().root_exists);
        if gamma < n as f64 {
            prop_assert!(!find_root_in_unit_interval(&k, 1.0 / scale, tol).unwrap().root_exists);
        }
        for (w_used, r) in [(1.0, critical), (scale, find_root_in_unit_interval(&k, scale, tol).unwrap())] {
            if let Some(z) = r.root {
                prop_assert!(z > 0.0 && z < 1.0);
                // |h(z)| against tol |h'(z)| for h(z) = z^n - w tau(z).
                let h = |z: f64| z.powi(n as i32) - w_used * k.tau(z).unwrap();
                let dh = (h((z + 1e-6).min(1.0)) - h(z - 1e-6)) / 2e-6;
                prop_assert!(r.residual <= 10.0 * tol * dh.abs() + 1e-15, "{r:?} dh {dh}");
            }
        }
    }

    #[test]
    fn limit_is_linear_in_the_seed(w in weights(5), a in 1i64..=50, b in 1i64..=50) {
        let k = exact_kernel(1, weighted(&w, 1, 1));
        prop_assume!(k.compare_moment_to_band(0.0) == Ordering::Less);
        let base = limit_value_n1(&k, &Number::Exact(q(b, 7))).unwrap();
        let scaled = limit_value_n1(&k, &Number::Exact(q(a * b, 7))).unwrap();
        let (Number::Exact(base), Number::Exact(scaled)) = (base, scaled) else { unreachable!() };
        prop_assert_eq!(scaled, base * q(a, 1));
    }

    #[test]
    fn generating_function_starts_at_first_value(
        n in 1usize..=3,
        c in prop::collection::vec(0.05f64..1.0, 1..6),
        x in prop::collection::vec(0.1f64..5.0, 3),
    ) {
        let k = ToeplitzKernel::from_f64(n, &c, 0.0).unwrap();
        let p = Prefix::from_f64(&x[..n]).unwrap();
        let v = chi_closed_form(&k, &p, 0.0).unwrap();
        prop_assert!((v - x[0]).abs() <= 1e-14 * x[0]);
    }

    #[test]
    fn band_one_generating_function_paths_agree(
        c in prop::collection::vec(0.05f64..1.0, 1..6),
        x0 in 0.1f64..5.0,
        z in 0.0f64..0.99,
    ) {
        let k = ToeplitzKernel::from_f64(1, &c, 0.0).unwrap();
        let general = chi_closed_form(&k, &Prefix::from_f64(&[x0]).unwrap(), z);
        let special = chi_closed_form_n1(&k, x0, z);
        match (general, special) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(b.abs())),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn takacs_values_form_a_distribution_function(w in weights(5)) {
        let probs = weighted(&w, 1, 1);
        let nu = DiscreteDist::from_rationals(probs).unwrap();
        prop_assume!(Number::Exact(q(1, 1)).to_f64() > nu.mean().to_f64());
        let Values::Exact(x) = takacs_dp(&nu, 40).unwrap() else { unreachable!() };
        prop_assert!(x.iter().all(|v| *v >= BigRational::zero() && *v <= q(1, 1)));
        prop_assert!(x.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn two_sequence_values_form_a_distribution_function(
        n in 1usize..=2,
        nu_w in weights(3),
        mu_w in prop::collection::vec(0i64..=10, 3),
    ) {
        let nu = DiscreteDist::from_rationals(weighted(&nu_w, 1, 1)).unwrap();
        let mut mu_w = mu_w[..=n].to_vec();
        if mu_w.iter().all(|&v| v == 0) {
            mu_w[n] = 1;
        }
        let mu = DiscreteDist::from_rationals(weighted(&mu_w, 1, 1)).unwrap();
        prop_assume!(mu.mean().to_f64() > nu.mean().to_f64() + 0.05);
        let d = step_dist(&nu, &mu, n).unwrap();
        prop_assume!(d.probs.get(0).is_some_and(|v| v.is_positive()));
        let kernel = step_kernel(&d).unwrap();
        prop_assert_eq!(kernel.mass(), Number::Exact(q(1, 1)));
        prop_assert_eq!(classify(&kernel, 1e-12).unwrap().regime, Regime::CriticalBounded);
        let s = two_seq_dp(&nu, &mu, n, 60).unwrap().to_f64_vec();
        prop_assert!(s.iter().all(|v| *v >= -1e-12 && *v <= 1.0 + 1e-12));
        prop_assert!(s.windows(2).all(|p| p[0] <= p[1] + 1e-12));
    }

    #[test]
    fn exact_trace_survives_csv(n in 1usize..=2, w in weights(4), seeds in prop::collection::vec(1i64..=9, 2)) {
        let k = exact_kernel(n, weighted(&w, 1, 1));
        let trace = solve_forward(&k, &exact_prefix(&seeds[..n]), 50).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        prop_assert_eq!(SolutionTrace::read_csv(&buf[..], Some(k.id())).unwrap(), trace);
    }

    #[test]
    fn kernel_json_round_trips(n in 1usize..=3, w in weights(5), c in prop::collection::vec(0.01f64..1.0, 1..5)) {
        let exact = exact_kernel(n, weighted(&w, 1, 1));
        let text = serde_json::to_string(&exact.to_file()).unwrap();
        prop_assert_eq!(ToeplitzKernel::from_json_str(&text).unwrap(), exact);
        let float = ToeplitzKernel::from_f64(n, &c, 0.0).unwrap();
        let text = serde_json::to_string(&float.to_file()).unwrap();
        prop_assert_eq!(ToeplitzKernel::from_json_str(&text).unwrap(), float);
    }
}
