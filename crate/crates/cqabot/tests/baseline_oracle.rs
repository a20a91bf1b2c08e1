//! The seeded shuffle estimator against an exact combinatorial expectation.

use cqabot::corpus::{Comment, Dataset, Label, SplitTag, Thread};
use cqabot::harness::random_order_map_estimate;
use cqabot::metrics::average_precision;

/// Exact E[AP] of a uniformly random ordering of `n` items with `r`
/// relevant: every set of relevant positions is equally likely, so
/// enumerate all C(n, r) of them.
fn exact_expected_ap(n: usize, r: usize) -> f64 {
    fn positions(n: usize, r: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == r {
            out.push(current.clone());
            return;
        }
        for p in start..n {
            current.push(p);
            positions(n, r, p + 1, current, out);
            current.pop();
        }
    }
    let mut subsets = Vec::new();
    positions(n, r, 0, &mut Vec::new(), &mut subsets);
    let total: f64 = subsets
        .iter()
        .map(|set| {
            let mut rel = vec![false; n];
            for &p in set {
                rel[p] = true;
            }
            average_precision(&rel).expect("r >= 1")
        })
        .sum();
    total / subsets.len() as f64
}

#[test]
fn shuffle_estimate_matches_exact_expectation() {
    let thread = Thread {
        id: "t".into(),
        subject: String::new(),
        body: "q".into(),
        comments: (0..10)
            .map(|i| Comment {
                id: format!("c{i}"),
                text: format!("answer {i}"),
                label: if i < 4 { Label::Good } else { Label::Bad },
            })
            .collect(),
    };
    let dataset = Dataset {
        threads: vec![thread],
        split_tag: SplitTag::Dev,
    };
    let exact = exact_expected_ap(10, 4);
    let estimate = random_order_map_estimate(&dataset, 100_000, 1234, None).unwrap();
    assert!(
        (estimate.mean - exact).abs() <= 0.005,
        "simulation {} vs exact {exact}",
        estimate.mean
    );
}
