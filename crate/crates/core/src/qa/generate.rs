//! Parameter binding, distractor synthesis and multiple-choice formatting.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::dynamics::ActionCatalog;
use crate::qa::oracle::FrameContext;
use crate::qa::{templates, Binding, Lookahead, QaError, QaOption, QuestionType, Side, Truth};
use crate::scenario::{Color, ObjectKind};
use crate::scene_graph::{DistanceBucket, Sector, SpatialEdge};
use crate::view::labels::label_text;

/// Most distractors per question (four options in total).
pub const MAX_DISTRACTORS: usize = 3;

fn pick_ids<R: Rng + ?Sized>(pool: &[u32], n: usize, rng: &mut R) -> Vec<u32> {
    pool.choose_multiple(rng, n).copied().collect()
}

/// Draws concrete values for every parameter of `qtype`'s template.
pub fn instantiate<R: Rng + ?Sized>(
    qtype: QuestionType,
    ctx: &FrameContext,
    rng: &mut R,
) -> Result<Binding, QaError> {
    use QuestionType as Q;
    let labels = ctx.graph.labels();
    let need = |n: usize| {
        if labels.len() < n {
            Err(QaError::unsupported(
                qtype,
                if n == 1 {
                    "no labeled objects"
                } else {
                    "fewer than two labeled objects"
                },
            ))
        } else {
            Ok(())
        }
    };
    let duration = |rng: &mut R| *Lookahead::ALL.choose(rng).expect("non-empty");
    let mut b = Binding::default();
    match qtype {
        Q::IdentifyDistance | Q::IdentifyPosition | Q::IdentifyHeading | Q::IdentifyType | Q::Grounding => {
            need(1)?;
            b.ids = pick_ids(&labels, 1, rng);
        }
        Q::IdentifyColor => {
            let colored: Vec<u32> = ctx
                .graph
                .nodes
                .iter()
                .filter(|(_, n)| n.color.is_some())
                .map(|(&l, _)| l)
                .collect();
            if colored.is_empty() {
                return Err(QaError::unsupported(qtype, "no colored objects"));
            }
            b.ids = pick_ids(&colored, 1, rng);
        }
        Q::IdentifyLeftmost
        | Q::IdentifyRightmost
        | Q::IdentifyClosest
        | Q::IdentifyFrontmost
        | Q::IdentifyBackmost
        | Q::OrderLeftmost
        | Q::OrderRightmost
        | Q::OrderClosest
        | Q::OrderFrontmost
        | Q::OrderBackmost => need(2)?,
        Q::RelativeDistance
        | Q::RelativePosition
        | Q::RelativeHeading
        | Q::RelativePredictCrashStill
        | Q::PickCloser => {
            need(2)?;
            b.ids = pick_ids(&labels, 2, rng);
        }
        Q::RelativePredictCrashDynamic => {
            need(2)?;
            b.ids = pick_ids(&labels, 2, rng);
            b.duration = Some(duration(rng));
        }
        Q::DescribeSector | Q::DescribeScenario => need(1)?,
        Q::DescribeDistance => {
            need(1)?;
            b.dist = Some(*DistanceBucket::ALL.choose(rng).expect("non-empty"));
        }
        Q::EmbodiedDistance | Q::EmbodiedSideness | Q::EmbodiedCollision => {
            if qtype == Q::EmbodiedCollision {
                need(1)?;
                b.ids = pick_ids(&labels, 1, rng);
            }
            let names: Vec<&str> = ctx.catalog.names().collect();
            b.action = Some(names.choose(rng).expect("catalog is non-empty").to_string());
            b.duration = Some(duration(rng));
            b.speed = Some(ctx.ego_state().speed);
        }
        Q::PredictCrashEgoStill | Q::PredictCrashEgoDynamic => {
            need(1)?;
            b.ids = pick_ids(&labels, 1, rng);
            b.duration = Some(duration(rng));
        }
    }
    Ok(b)
}

/// Substitutes bound values into a template string.
pub fn fill(text: &str, b: &Binding, catalog: &ActionCatalog) -> String {
    let mut out = text.to_string();
    for (i, key) in ["<id1>", "<id2>"].into_iter().enumerate() {
        if let Some(&l) = b.ids.get(i) {
            out = out.replace(key, &label_text(l));
        }
    }
    if let Some(a) = &b.action {
        let gloss = catalog.get(a).map_or_else(|| a.clone(), |x| x.gloss());
        out = out.replace("<action>", &gloss);
    }
    if let Some(d) = b.duration {
        out = out.replace("<duration>", d.text());
    }
    if let Some(v) = b.speed {
        out = out.replace("<speed>", &format!("{v:.1} m/s"));
    }
    if let Some(d) = b.dist {
        out = out.replace("<dist>", d.word());
    }
    out
}

/// Question body with every parameter resolved.
pub fn render_question(qtype: QuestionType, b: &Binding, catalog: &ActionCatalog) -> String {
    fill(&templates().get(qtype).question, b, catalog)
}

fn others<T: Copy + PartialEq, R: Rng + ?Sized>(all: &[T], truth: T, rng: &mut R) -> Vec<T> {
    let mut v: Vec<T> = all.iter().copied().filter(|x| *x != truth).collect();
    v.shuffle(rng);
    v
}

/// Candidates present in the frame come first, each group shuffled.
fn present_first<T: Copy + PartialEq, R: Rng + ?Sized>(
    all: &[T],
    present: &[T],
    truth: T,
    rng: &mut R,
) -> Vec<T> {
    let mut near: Vec<T> = Vec::new();
    for &p in present {
        if p != truth && !near.contains(&p) {
            near.push(p);
        }
    }
    near.shuffle(rng);
    let mut far: Vec<T> = all
        .iter()
        .copied()
        .filter(|x| *x != truth && !near.contains(x))
        .collect();
    far.shuffle(rng);
    near.extend(far);
    near
}

/// Adds or removes exactly one label.
fn set_perturbations(set: &[u32], universe: &[u32]) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for &l in universe {
        let mut s: Vec<u32> = set.to_vec();
        if let Some(i) = s.iter().position(|&x| x == l) {
            s.remove(i);
        } else {
            s.push(l);
            s.sort_unstable();
        }
        out.push(s);
    }
    out
}

fn permutations(items: &[u32]) -> Vec<Vec<u32>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Non-identity reorderings; exhaustive for up to 5 items, sampled beyond.
fn reorderings<R: Rng + ?Sized>(order: &[u32], rng: &mut R) -> Vec<Vec<u32>> {
    if order.len() <= 5 {
        let mut all: Vec<Vec<u32>> = permutations(order).into_iter().filter(|p| p != order).collect();
        all.shuffle(rng);
        return all;
    }
    let mut out: Vec<Vec<u32>> = Vec::new();
    while out.len() < MAX_DISTRACTORS {
        let mut p = order.to_vec();
        p.shuffle(rng);
        if p != order && !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Wrong answers for `truth`, at most three, pairwise distinct and distinct
/// from the truth.
pub fn gen_distractors<R: Rng + ?Sized>(
    qtype: QuestionType,
    truth: &Truth,
    b: &Binding,
    ctx: &FrameContext,
    rng: &mut R,
) -> Result<Vec<Truth>, QaError> {
    let g = ctx.graph;
    let labels = g.labels();
    let candidates: Vec<Truth> = match truth {
        Truth::Bucket(x) => others(&DistanceBucket::ALL, *x, rng).into_iter().map(Truth::Bucket).collect(),
        Truth::Sector(x) => others(&Sector::ALL, *x, rng).into_iter().map(Truth::Sector).collect(),
        Truth::Heading(x) => {
            // at least 90 degrees away from the truth
            let mut v: Vec<Sector> = Sector::ALL.into_iter().filter(|s| s.steps_apart(*x) >= 2).collect();
            v.shuffle(rng);
            v.into_iter().map(Truth::Heading).collect()
        }
        Truth::Color(x) => {
            let present: Vec<Color> = g.nodes.values().filter_map(|n| n.color).collect();
            present_first(&Color::ALL, &present, *x, rng)
                .into_iter()
                .map(Truth::Color)
                .collect()
        }
        Truth::Kind(x) => {
            let present: Vec<ObjectKind> = g.nodes.values().map(|n| n.kind).collect();
            present_first(&ObjectKind::ALL, &present, *x, rng)
                .into_iter()
                .map(Truth::Kind)
                .collect()
        }
        Truth::Label(x) => {
            if qtype == QuestionType::PickCloser {
                b.ids.iter().filter(|&&l| l != *x).map(|&l| Truth::Label(l)).collect()
            } else {
                others(&labels, *x, rng).into_iter().map(Truth::Label).collect()
            }
        }
        Truth::LabelSet(set) => {
            let mut v = set_perturbations(set, &labels);
            v.shuffle(rng);
            v.into_iter().map(Truth::LabelSet).collect()
        }
        Truth::Ordering(order) => reorderings(order, rng).into_iter().map(Truth::Ordering).collect(),
        Truth::Edge(e) => {
            // the mirrored relation is the most confusable one
            let mut v = vec![e.reversed()];
            v.extend(others(&SpatialEdge::ALL, *e, rng).into_iter().filter(|x| *x != e.reversed()));
            v.into_iter().map(Truth::Edge).collect()
        }
        Truth::YesNo(v) => vec![Truth::YesNo(!v)],
        Truth::Side(s) => others(&[Side::Left, Side::Right, Side::Neither], *s, rng)
            .into_iter()
            .map(Truth::Side)
            .collect(),
        Truth::Inventory(items) => {
            let present: Vec<ObjectKind> = items.iter().map(|(_, k)| *k).collect();
            let mut v: Vec<Vec<(u32, ObjectKind)>> = Vec::new();
            for i in 0..items.len() {
                if items.len() > 1 {
                    let mut dropped = items.clone();
                    dropped.remove(i);
                    v.push(dropped);
                }
                let kind = present_first(&ObjectKind::ALL, &present, items[i].1, rng)[0];
                let mut swapped = items.clone();
                swapped[i].1 = kind;
                v.push(swapped);
            }
            v.shuffle(rng);
            v.into_iter().map(Truth::Inventory).collect()
        }
    };
    let truth_text = truth.text();
    let mut seen = vec![truth_text];
    let mut out = Vec::new();
    for c in candidates {
        let t = c.text();
        if !seen.contains(&t) {
            seen.push(t);
            out.push(c);
            if out.len() == MAX_DISTRACTORS {
                break;
            }
        }
    }
    if out.is_empty() {
        return Err(QaError::InsufficientCandidates(qtype));
    }
    Ok(out)
}

/// A formatted multiple-choice question.
#[derive(Debug, Clone, PartialEq)]
pub struct Mcq {
    /// Body, option list and answer-format instruction.
    pub question: String,
    pub options: Vec<QaOption>,
    pub answer: char,
}

/// Shuffles truth and distractors into lettered options. Yes/no questions
/// keep the fixed order "(A) Yes (B) No".
pub fn format_mcq<R: Rng + ?Sized>(
    qtype: QuestionType,
    body: &str,
    truth: &Truth,
    distractors: &[Truth],
    rng: &mut R,
) -> Mcq {
    let mut texts: Vec<(String, bool)> = if qtype.is_yes_no() {
        let yes = matches!(truth, Truth::YesNo(true));
        vec![("Yes".to_string(), yes), ("No".to_string(), !yes)]
    } else {
        let mut v = vec![(truth.text(), true)];
        v.extend(distractors.iter().map(|d| (d.text(), false)));
        v.shuffle(rng);
        v
    };
    texts.truncate(MAX_DISTRACTORS + 1);
    let options: Vec<QaOption> = texts
        .iter()
        .enumerate()
        .map(|(i, (t, _))| QaOption {
            letter: (b'A' + i as u8) as char,
            text: t.clone(),
        })
        .collect();
    let answer = options[texts.iter().position(|(_, c)| *c).expect("truth is an option")].letter;
    let listing = options
        .iter()
        .map(|o| format!("({}) {}", o.letter, o.text))
        .collect::<Vec<_>>()
        .join(" ");
    Mcq {
        question: format!("{body} {listing}. {}", templates().suffix),
        options,
        answer,
    }
}

/// Explanation text: the template's reasoning plus the chosen option.
pub fn explain(
    qtype: QuestionType,
    b: &Binding,
    catalog: &ActionCatalog,
    truth: &Truth,
    detail: &str,
    mcq: &Mcq,
) -> String {
    let reason = fill(&templates().get(qtype).explanation, b, catalog)
        .replace("{truth}", &truth.text())
        .replace("{detail}", detail);
    let chosen = mcq
        .options
        .iter()
        .find(|o| o.letter == mcq.answer)
        .expect("answer letter is an option");
    format!("{reason} The correct option is ({}) {}.", chosen.letter, chosen.text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn permutations_enumerate_factorial() {
        assert_eq!(permutations(&[1, 2, 3]).len(), 6);
        assert_eq!(permutations(&[1, 2, 3, 4]).len(), 24);
    }

    #[test]
    fn reorderings_exclude_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = reorderings(&[4, 1, 7], &mut rng);
        assert_eq!(r.len(), 5);
        assert!(r.iter().all(|p| p != &[4, 1, 7]));
    }

    #[test]
    fn set_perturbations_change_one_element() {
        let v = set_perturbations(&[1, 3], &[1, 2, 3]);
        assert_eq!(v, vec![vec![3], vec![1, 2, 3], vec![1]]);
    }

    #[test]
    fn yes_no_options_are_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = format_mcq(
            QuestionType::RelativeHeading,
            "q?",
            &Truth::YesNo(false),
            &[Truth::YesNo(true)],
            &mut rng,
        );
        assert_eq!(m.options[0].text, "Yes");
        assert_eq!(m.options[1].text, "No");
        assert_eq!(m.answer, 'B');
    }

    #[test]
    fn same_seed_same_letters() {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            format_mcq(
                QuestionType::IdentifyDistance,
                "q?",
                &Truth::Bucket(DistanceBucket::Close),
                &[
                    Truth::Bucket(DistanceBucket::Far),
                    Truth::Bucket(DistanceBucket::Medium),
                    Truth::Bucket(DistanceBucket::VeryClose),
                ],
                &mut rng,
            )
        };
        assert_eq!(run(9), run(9));
    }
}
