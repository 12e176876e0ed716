use miqp::{ExclusivePair, MiqpProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random convex MIQP shaped like a tiny storage schedule: `pairs` storage
/// units each with a charge and a discharge column (exclusive via switches),
/// a level column per unit, switched "boost" columns, and a coupling row per
/// unit. Quadratic terms are sums of squares, so the relaxation is convex.
pub fn random_problem(seed: u64, pairs: usize, switched: usize) -> MiqpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = MiqpProblem::new();
    let mut flow = Vec::new();
    for u in 0..pairs {
        let c = p.add_var(format!("c{u}"), 0.0, 1.0);
        let d = p.add_var(format!("d{u}"), 0.0, 1.0);
        let level = p.add_var(format!("s{u}"), 0.0, 2.0);
        let yc = p.add_binary(format!("yc{u}"), 0);
        let yd = p.add_binary(format!("yd{u}"), 0);
        p.add_row(format!("c_off{u}"), vec![(c, 1.0), (yc, 1.0)], f64::NEG_INFINITY, 1.0);
        p.add_row(format!("d_off{u}"), vec![(d, 1.0), (yd, 1.0)], f64::NEG_INFINITY, 1.0);
        p.add_row(format!("one{u}"), vec![(yc, 1.0), (yd, 1.0)], 1.0, 1.0);
        let init = rng.gen_range(0.2..1.0);
        p.add_row(
            format!("level{u}"),
            vec![(level, 1.0), (c, -0.9), (d, 1.1)],
            init,
            init,
        );
        p.add_linear(c, rng.gen_range(-1.0..1.0));
        p.add_linear(d, rng.gen_range(-1.0..1.0));
        p.add_linear(level, rng.gen_range(-0.5..0.5));
        p.add_squared_term(rng.gen_range(0.05..0.5), &[(c, 1.0), (d, -1.0)]);
        p.add_squared_term(rng.gen_range(0.01..0.2), &[(level, 1.0)]);
        p.exclusive_pairs.push(ExclusivePair {
            first: c,
            second: d,
            first_off: yc,
            second_off: yd,
        });
        flow.push((c, 1.0));
        flow.push((d, -1.0));
    }
    for k in 0..switched {
        let x = p.add_var(format!("x{k}"), 0.0, 3.0);
        let z = p.add_binary(format!("z{k}"), 1);
        p.add_row(format!("link{k}"), vec![(x, 1.0), (z, -3.0)], f64::NEG_INFINITY, 0.0);
        p.add_linear(z, rng.gen_range(0.0..0.6));
        p.add_linear(x, rng.gen_range(-1.0..0.2));
        p.add_squared_term(rng.gen_range(0.05..0.3), &[(x, 1.0)]);
        flow.push((x, 1.0));
    }
    // A demand row that couples everything.
    let demand = rng.gen_range(0.0..1.5);
    p.add_row("demand", flow, demand, f64::INFINITY);
    p
}
