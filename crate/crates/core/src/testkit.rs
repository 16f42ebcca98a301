//! Generators for property tests.

use proptest::prelude::*;

use crate::model::{CompositeSource, FadingChannel};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        let mut p: Vec<f64> = w.iter().map(|x| x / s).collect();
        // absorb rounding so the sum is 1 to the last bit we can manage
        let rest: f64 = p[1..].iter().sum();
        p[0] = 1.0 - rest;
        p
    })
}

pub fn source(max_j: usize) -> impl Strategy<Value = CompositeSource> {
    (1..=max_j).prop_flat_map(|j| {
        (prop::collection::vec(0.1f64..20.0, j), simplex(j))
            .prop_map(|(v, p)| CompositeSource::new(v, p).expect("valid source"))
    })
}

/// Discrete law with distinct magnitudes in roughly `[0.2, 5]`.
pub fn discrete_channel(max_k: usize) -> impl Strategy<Value = FadingChannel> {
    (1..=max_k).prop_flat_map(|k| {
        (0.2f64..1.0, prop::collection::vec(0.05f64..1.0, k), simplex(k)).prop_map(|(start, steps, p)| {
            let mut h = start;
            let states = steps
                .iter()
                .zip(p)
                .map(|(s, w)| {
                    let out = (h, w);
                    h += s;
                    out
                })
                .collect();
            FadingChannel::discrete(states).expect("valid channel")
        })
    })
}
