use ca_i2p::matching::{cosine_score_map, sinkhorn};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_force_assignment(cost: &Array2<f64>) -> f64 {
    let n = cost.dim().0;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    fn heap(k: usize, perm: &mut Vec<usize>, cost: &Array2<f64>, best: &mut f64) {
        if k == 1 {
            let c: f64 = perm.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
            if c < *best { *best = c; }
            return;
        }
        for i in 0..k {
            heap(k - 1, perm, cost, best);
            if k % 2 == 0 { perm.swap(i, k - 1); } else { perm.swap(0, k - 1); }
        }
    }
    heap(n, &mut perm, cost, &mut best);
    best
}

fn main() {
    let start = std::time::Instant::now();
    let mut worst_rel = 0.0f64;
    let mut worst_viol = 0.0f64;
    let mut fails = 0;
    let mut max_it = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fa = Array2::from_shape_fn((8, 32), |_| rng.random::<f64>() * 2.0 - 1.0);
        let fb = Array2::from_shape_fn((8, 32), |_| rng.random::<f64>() * 2.0 - 1.0);
        let cost = cosine_score_map(&fa, &fb).unwrap().cost();
        let plan = sinkhorn(&cost, 0.01, 30000, 1e-5).unwrap();
        let opt = brute_force_assignment(&cost) / 8.0;
        let rel = (plan.transport_cost(&cost) - opt) / opt;
        if rel > worst_rel { worst_rel = rel; }
        if rel > 0.01 { fails += 1; }
        worst_viol = worst_viol.max(plan.max_marginal_violation());
        max_it = max_it.max(plan.iterations());
    }
    println!("worst rel: {worst_rel:.5}, fails: {fails}, worst viol: {worst_viol:.2e}, max iters: {max_it}, elapsed: {:?}", start.elapsed());
}
