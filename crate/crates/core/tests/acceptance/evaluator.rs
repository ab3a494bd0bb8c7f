use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segames_core::evaluator::{evaluate, Evaluation, Evaluator, Scorer, ScoringConfig};

use crate::common::{reference_evaluate, RefConfig};
use crate::ensure;

const CASES: usize = 1_000;

const TARGET_WORDS: &[&str] = &[
    "cell", "divides", "copies", "DNA", "nucleus", "membrane", "energy", "Cells",
];
const PRIOR_WORDS: &[&str] = &["living", "organisms", "made", "cells", "existing", "membrane", "tissue"];
const NOVEL_WORDS: &[&str] = &[
    "because",
    "protein",
    "growth",
    "repair",
    "chromosome",
    "mitosis",
    "body",
    "heal",
    "skin",
    "zygote",
    "élan",
    "x2",
    "42",
];
const STOP: &[&str] = &["the", "a", "of", "and", "is", "it", "to", "THE", "In"];
const PUNCT: &[&str] = &[" ", " ", " ", ", ", ". ", "! ", " - ", "'"];

fn sentence(rng: &mut ChaCha8Rng, pools: &[&[&str]], len: usize) -> String {
    let mut s = String::new();
    for _ in 0..len {
        let pool = pools[rng.gen_range(0..pools.len())];
        s.push_str(pool[rng.gen_range(0..pool.len())]);
        s.push_str(PUNCT[rng.gen_range(0..PUNCT.len())]);
    }
    s
}

fn check_example(name: &str, got: &Evaluation, score: u8, flag: Option<&str>) -> Result<(), String> {
    let flags = got.flags;
    let flag_ok = match flag {
        Some("too_short") => flags.too_short,
        Some("too_similar") => flags.too_similar,
        Some("irrelevant") => flags.irrelevant,
        _ => !flags.any(),
    };
    ensure(got.score == score && flag_ok, || {
        format!("{name}: got {got:?}, expected score {score} flag {flag:?}")
    })
}

pub fn run() -> crate::Outcome {
    let cfg = ScoringConfig::default();
    let eval = |se: &str, t: &str, p: &str| evaluate(se, t, p, &cfg, None).map_err(|e| e.to_string());

    let target = "Before a cell divides, it copies all of its DNA.";
    let prior = "Every living thing is made of cells.";
    check_example("empty SE", &eval("", target, prior)?, 0, Some("too_short"))?;
    check_example("verbatim target", &eval(target, target, prior)?, 0, Some("too_similar"))?;

    // 5 distinct content words, 4 of them in the target: sim_target is exactly 0.8.
    let boundary = eval("alpha beta gamma delta zeta", "alpha beta gamma delta epsilon", "")?;
    ensure(boundary.features.sim_target == 0.8, || {
        format!("boundary sim_target {}", boundary.features.sim_target)
    })?;
    check_example("sim_target == 0.8", &boundary, 0, Some("too_similar"))?;

    let one = eval(
        "cells divide using stored energy food",
        "cells divide rapidly today",
        "membranes protect organisms",
    )?;
    ensure(one.features.content_len == 6 && one.features.novel_count == 4, || {
        format!("6-word case features {:?}", one.features)
    })?;
    check_example("6 words, 2 in target, none in prior", &one, 1, None)?;

    let three = eval(
        "river sediment downstream deltas erosion mountains rain valleys farmers soil fertile crops",
        "The river carries sediment downstream.",
        "Sediment builds deltas downstream.",
    )?;
    ensure(
        three.features.sim_target == 0.25 && three.features.sim_prior == 0.25 && three.features.novel_count == 8,
        || format!("12-word case features {:?}", three.features),
    )?;
    check_example("12 words, bridging, 8 novel", &three, 3, None)?;

    let scorer = Evaluator::new(cfg.clone()).map_err(|e| e.to_string())?;
    let reference_cfg = RefConfig::defaults();
    let mut rng = ChaCha8Rng::seed_from_u64(0xE7A1);
    let mut histogram = [0usize; 4];
    for i in 0..CASES {
        let (target_len, prior_len) = (rng.gen_range(3..10), rng.gen_range(0..14));
        let target = sentence(&mut rng, &[TARGET_WORDS, STOP], target_len);
        let prior = sentence(&mut rng, &[PRIOR_WORDS, STOP], prior_len);
        let se_len = rng.gen_range(0..20);
        let se = sentence(&mut rng, &[TARGET_WORDS, PRIOR_WORDS, NOVEL_WORDS, STOP], se_len);
        let got = scorer
            .score(&se, &target, &prior)
            .map_err(|e| format!("case {i}: {e}"))?;
        let want = reference_evaluate(&se, &target, &prior, &reference_cfg);
        let f = &got.features;
        let same = got.score == want.score
            && got.flags.too_short == want.too_short
            && got.flags.too_similar == want.too_similar
            && got.flags.irrelevant == want.irrelevant
            && f.content_len == want.content_len
            && f.sim_target == want.sim_target
            && f.sim_prior == want.sim_prior
            && f.novel_count == want.novel_count;
        ensure(same, || {
            format!("case {i} mismatch\n se={se:?}\n target={target:?}\n prior={prior:?}\n engine={got:?}\n reference={want:?}")
        })?;
        ensure((got.score == 0) == got.flags.any(), || {
            format!("case {i}: score/flag equivalence broken")
        })?;
        histogram[got.score as usize] += 1;
    }
    Ok(format!(
        "empty -> 0/too_short, verbatim -> 0/too_similar, sim_target == 0.8 -> too_similar, hand-computed 1 and 3 cases; {CASES} random cases vs reference: 0 mismatches (scores 0/1/2/3: {histogram:?})"
    ))
}
