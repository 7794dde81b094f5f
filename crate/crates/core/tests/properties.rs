mod common;

use ccucp::annealer::Adjacency;
use ccucp::encoding::{total_binary_variables, BitString, Formulation};
use ccucp::instance::{builtin_deterministic_instance, builtin_stochastic_instance};
use ccucp::qubo::{
    compile, compile_formulation, decoded_violations, PenaltyWeights, REFERENCE_COUPLINGS_STOCHASTIC_N10,
};
use ccucp::reference_solver::{derive_switching, solve_deterministic};
use ccucp::scenario_model::{check_feasible, objective, Solution, DEFAULT_TOL};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn random_bits(rng: &mut impl Rng, n: usize) -> BitString {
    BitString((0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect())
}

#[test]
fn incremental_delta_matches_full_energy() {
    let instance = builtin_stochastic_instance();
    let scenarios = scenarios_for(&instance, 10, 3);
    let model = compile(&instance, &PenaltyWeights::reference_preset(), Some(&scenarios), Some(0.9)).unwrap();
    let adj = Adjacency::new(&model);
    let mut rng = rng(21);
    let mut x = random_bits(&mut rng, model.num_vars).0;
    let mut fields = adj.local_fields(&x);
    let mut energy = model.energy(&BitString(x.clone())).unwrap();
    for step in 0..100_000 {
        let i = rng.gen_range(0..model.num_vars);
        let delta = adj.delta(&x, &fields, i);
        adj.flip(&mut x, &mut fields, i);
        energy += delta;
        if step % 1000 == 999 {
            let exact = model.energy(&BitString(x.clone())).unwrap();
            assert!((exact - energy).abs() <= 1e-6 * exact.abs().max(1.0), "step {step}: {energy} vs {exact}");
            energy = exact;
        }
    }
}

#[test]
fn single_flip_deltas_are_exact() {
    let instance = builtin_deterministic_instance();
    let model = compile(&instance, &PenaltyWeights::reference_preset(), None, None).unwrap();
    let adj = Adjacency::new(&model);
    let mut rng = rng(22);
    for _ in 0..200 {
        let x = random_bits(&mut rng, model.num_vars);
        let fields = adj.local_fields(&x.0);
        let before = model.energy(&x).unwrap();
        let i = rng.gen_range(0..model.num_vars);
        let mut y = x.clone();
        y.0[i] ^= 1;
        let after = model.energy(&y).unwrap();
        let delta = adj.delta(&x.0, &fields, i);
        assert!((after - before - delta).abs() <= 1e-7 * before.abs().max(1.0));
    }
}

#[test]
fn stochastic_coupling_count_is_seed_independent() {
    let instance = builtin_stochastic_instance();
    for seed in [1, 7, 42] {
        let scenarios = scenarios_for(&instance, 10, seed);
        let model = compile(&instance, &PenaltyWeights::default(), Some(&scenarios), Some(0.9)).unwrap();
        assert_eq!(model.num_vars, 809);
        assert_eq!(model.stats().num_couplings, REFERENCE_COUPLINGS_STOCHASTIC_N10);
    }
}

#[test]
fn deterministic_optimum_is_encodable() {
    let instance = builtin_deterministic_instance();
    let solution = solve_deterministic(&instance).unwrap();
    assert!(solution.p.iter().flatten().all(|p| p.fract() == 0.0));
    let f = Formulation::deterministic(&instance).unwrap();
    let bits = f.encode(&solution).unwrap();
    let model = compile_formulation(&f, &PenaltyWeights::reference_preset()).unwrap();
    assert!(model.violations(&bits).unwrap().values().all(|v| *v == 0));
    let energy = model.energy(&bits).unwrap();
    assert!((energy - 191.8).abs() < 1e-6, "energy {energy}");
    assert_eq!(f.decode(&bits).unwrap(), solution);
}

/// check_feasible on decoded schedules agrees with the per-group decoded
/// violation counts.
#[test]
fn decoded_violations_agree_with_feasibility_check() {
    let instance = builtin_stochastic_instance();
    let scenarios = scenarios_for(&instance, 6, 5);
    let f = Formulation::stochastic(&instance, &scenarios, 0.75).unwrap();
    let mut rng = rng(23);
    for _ in 0..2000 {
        let bits = random_bits(&mut rng, f.num_vars());
        let sol = f.decode(&bits).unwrap();
        let report = check_feasible(&instance, f.scenarios.as_ref(), 0.75, &sol, DEFAULT_TOL).unwrap();
        let counts = decoded_violations(&f, &bits).unwrap();
        assert_eq!(report.joint, counts.values().all(|c| *c == 0));
    }
}

fn random_schedule(rng: &mut impl Rng, f: &Formulation) -> Solution {
    let inst = &f.instance;
    let top = (1i64 << f.layout.n_gen) - 1;
    let u: Vec<Vec<u8>> = (0..inst.num_generators())
        .map(|_| (0..inst.horizon).map(|_| u8::from(rng.gen_bool(0.6))).collect())
        .collect();
    let (z_on, z_off) = derive_switching(&u, &inst.initial);
    let p = inst
        .generators
        .iter()
        .zip(&u)
        .map(|(g, row)| {
            row.iter()
                .map(|on| if *on == 1 { (g.p_min + rng.gen_range(0..=top.min(g.p_max - g.p_min))) as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    let y = f
        .is_stochastic()
        .then(|| (0..f.layout.scenarios).map(|_| u8::from(rng.gen_bool(0.8))).collect());
    let mut s = Solution { u, z_on, z_off, p, y, objective: 0.0 };
    s.objective = objective(inst, &s).unwrap();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn layout_is_a_contiguous_partition(seed in any::<u64>(), stochastic in any::<bool>(), n in 1usize..12) {
        let mut rng = rng(seed);
        let (f, expected) = if stochastic {
            let instance = random_gaussian_instance(&mut rng);
            let s = scenarios_for(&instance, n, seed);
            let total = total_binary_variables(&instance, Some(n), Some(0.8)).unwrap();
            (Formulation::stochastic(&instance, &s, 0.8).unwrap(), total)
        } else {
            let g = rng.gen_range(1..=3);
            let t = rng.gen_range(1..=4);
            let instance = random_fixed_instance(&mut rng, g, t);
            let total = total_binary_variables(&instance, None, None).unwrap();
            (Formulation::deterministic(&instance).unwrap(), total)
        };
        prop_assert_eq!(f.num_vars(), expected);
        prop_assert_eq!(f.widths.total(f.instance.horizon), expected);
        let mut cursor = 0;
        for e in f.layout.entries() {
            prop_assert_eq!(e.start, cursor, "{} starts off the cursor", e.name);
            cursor += e.len;
        }
        prop_assert_eq!(cursor, expected);
    }

    #[test]
    fn encode_then_decode_is_identity(seed in any::<u64>(), stochastic in any::<bool>()) {
        let mut rng = rng(seed);
        let f = if stochastic {
            let instance = random_gaussian_instance(&mut rng);
            let n = rng.gen_range(1..=8);
            let s = scenarios_for(&instance, n, seed);
            Formulation::stochastic(&instance, &s, 0.75).unwrap()
        } else {
            let g = rng.gen_range(1..=3);
            let t = rng.gen_range(1..=3);
            Formulation::deterministic(&random_fixed_instance(&mut rng, g, t)).unwrap()
        };
        let s = random_schedule(&mut rng, &f);
        let bits = f.encode(&s).unwrap();
        prop_assert_eq!(f.decode(&bits).unwrap(), s);
    }

    #[test]
    fn decode_encode_decode_is_stable(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let instance = random_gaussian_instance(&mut rng);
        let s = scenarios_for(&instance, 5, seed);
        let f = Formulation::stochastic(&instance, &s, 0.6).unwrap();
        let bits = random_bits(&mut rng, f.num_vars());
        let first = f.decode(&bits).unwrap();
        let canonical = f.encode(&first).unwrap();
        prop_assert_eq!(f.decode(&canonical).unwrap(), first);
        prop_assert_eq!(f.encode(&f.decode(&canonical).unwrap()).unwrap(), canonical);
    }

    #[test]
    fn bitstring_text_round_trip(bits in proptest::collection::vec(0u8..2, 0..300)) {
        let b = BitString(bits);
        prop_assert_eq!(b.to_string().parse::<BitString>().unwrap(), b);
    }
}
