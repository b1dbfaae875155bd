//! Synthetic workloads shared by the benchmarks.

use openrule_core::logspace::normalize_log_weights;
use openrule_core::rule::render_applicability_prompt;
use openrule_core::scorer::{train_ngram, NgramModel, TrainingPair};
use openrule_core::Instantiation;

const VERBS: [&str; 8] = ["founded", "created", "runs", "owns", "leads", "funded", "built", "sold"];
const LINKS: [&str; 4] = ["the founder of", "a member of", "the owner of", "part of"];

/// `n` entity pairs, each with a few relation sentences, trained into an
/// order-3 model. Returns the model and uniform instantiations over the pairs.
pub fn relation_workload(n: usize) -> (NgramModel, Vec<Instantiation>) {
    let mut corpus = Vec::new();
    let mut ins = Vec::new();
    for i in 0..n {
        let pair = Instantiation::pair(format!("Person {i}"), format!("Company {i}"), 0.0);
        let condition = render_applicability_prompt(&pair, false).expect("pair prompt");
        for j in 0..4 {
            let target = match (i + j) % 3 {
                0 => format!("[X] {} [Y].", VERBS[(i * 3 + j) % VERBS.len()]),
                1 => format!("[X] is {} [Y].", LINKS[(i + j) % LINKS.len()]),
                _ => format!("[Y] was {} by [X].", VERBS[(i + 2 * j) % VERBS.len()]),
            };
            corpus.push(TrainingPair::from_text(condition.clone(), &target));
        }
        ins.push(pair);
    }
    let weights = normalize_log_weights(&vec![0.0; n]);
    for (i, w) in ins.iter_mut().zip(weights) {
        i.log_weight = w;
    }
    (train_ngram(&corpus, 3, 0.1).expect("non-empty corpus"), ins)
}

/// Deterministic sentence pairs for metric throughput.
pub fn sentence_pairs(n: usize) -> Vec<(String, String)> {
    (0..n)
        .map(|i| {
            let a = format!("[X] {} [Y] in {} .", VERBS[i % VERBS.len()], 1900 + i % 97);
            let b = format!("[X] is {} [Y] since {} .", LINKS[i % LINKS.len()], 1900 + i % 89);
            (a, b)
        })
        .collect()
}
