//! End-to-end run: detections to ranked interpretations, then metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Mode, PipelineConfig};
use super::files::{load_ground_truth, load_vocabulary, GroundTruth};
use super::metrics::{activity_accuracy, hits_at_k};
use crate::abduction::{candidate_actions, ActionHypothesis, ActionMode};
use crate::attention::{group_segments, load_detections, Segment};
use crate::attention::{select_regions, target_distribution, DetectionFrame, RegionProposal};
use crate::concept::ConceptId;
use crate::correspondence::expand_vocabulary;
use crate::embedding::{load_embeddings, EmbeddingTable};
use crate::error::{Error, Result};
use crate::inference::{anneal, Candidate, Interpretation, SearchSpace};
use crate::knowledge::{load_assertions, AssertionFormat, Ingested, KnowledgeGraph};
use crate::pattern::{to_dot, Generator};

/// Everything a run reads from disk.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub graph: KnowledgeGraph,
    pub embeddings: EmbeddingTable,
    pub frames: Vec<DetectionFrame>,
    pub ground_truth: Option<GroundTruth>,
    pub actions: Option<BTreeSet<ConceptId>>,
    pub objects: Option<BTreeSet<ConceptId>>,
}

fn report<T>(path: &Path, ingested: Ingested<T>) -> T {
    if !ingested.rejected.is_empty() {
        log::warn!("{}: {} malformed records skipped", path.display(), ingested.rejected.len());
    }
    if ingested.skipped > 0 {
        log::info!("{}: {} records left out", path.display(), ingested.skipped);
    }
    ingested.value
}

fn required<'a>(path: &'a Option<std::path::PathBuf>, name: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("paths.{name} is required")))
}

pub fn load_inputs(config: &PipelineConfig) -> Result<Inputs> {
    let paths = &config.paths;
    let kg_path = required(&paths.assertions, "assertions")?;
    let graph = load_assertions(kg_path, AssertionFormat::Auto).map_err(|e| e.in_file(kg_path))?;
    let graph = report(kg_path, graph).with_hop_bound(config.path_hop_bound);

    let emb_path = required(&paths.embeddings, "embeddings")?;
    let embeddings = report(emb_path, load_embeddings(emb_path).map_err(|e| e.in_file(emb_path))?);

    let det_path = required(&paths.detections, "detections")?;
    let frames = report(
        det_path,
        load_detections(det_path, config.detection_threshold).map_err(|e| e.in_file(det_path))?,
    );

    let ground_truth = match &paths.ground_truth {
        Some(p) => Some(report(p, load_ground_truth(p).map_err(|e| e.in_file(p))?)),
        None => None,
    };
    let vocab = |path: &Option<std::path::PathBuf>| -> Result<Option<BTreeSet<ConceptId>>> {
        match path {
            Some(p) => Ok(Some(report(p, load_vocabulary(p).map_err(|e| e.in_file(p))?))),
            None => Ok(None),
        }
    };
    Ok(Inputs {
        graph,
        embeddings,
        frames,
        ground_truth,
        actions: vocab(&paths.actions)?,
        objects: vocab(&paths.objects)?,
    })
}

/// One line of the interpretation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretationRecord {
    pub segment: String,
    pub rank: usize,
    pub noun: ConceptId,
    pub verb: ConceptId,
    pub energy: f64,
    pub dot: String,
}

#[derive(Debug, Clone)]
pub struct SegmentResult {
    pub segment: String,
    /// Target objects with normalized evidence, best first.
    pub objects: Vec<(ConceptId, f64)>,
    pub actions: Vec<ActionHypothesis>,
    pub interpretations: Vec<Interpretation>,
    pub records: Vec<InterpretationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSegment {
    pub segment: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyAtK {
    pub k: usize,
    pub noun: f64,
    pub verb: f64,
    pub activity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub segments: usize,
    pub skipped: Vec<SkippedSegment>,
    /// Segments scored against ground truth; skipped ones count as misses.
    pub evaluated: usize,
    pub accuracy: Vec<AccuracyAtK>,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub results: Vec<SegmentResult>,
    pub metrics: MetricsReport,
}

impl PipelineReport {
    /// Interpretations as JSON lines, segments in input order.
    pub fn interpretation_lines(&self) -> String {
        let mut out = String::new();
        for r in self.results.iter().flat_map(|s| &s.records) {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Loads every input named by `config` and runs the pipeline.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport> {
    config.validate()?;
    config.validate_paths()?;
    let inputs = load_inputs(config)?;
    run_with_inputs(config, &inputs)
}

/// Per-segment chain seed: independent of segment order in the input.
fn segment_seed(seed: u64, segment: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in segment.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}

struct Context<'a> {
    config: &'a PipelineConfig,
    graph: &'a KnowledgeGraph,
    embeddings: &'a EmbeddingTable,
    targets: Option<BTreeSet<ConceptId>>,
    mode: ActionMode,
}

impl Context<'_> {
    fn known(&self, c: &ConceptId) -> bool {
        self.graph.contains(c) && self.embeddings.contains(c)
    }

    fn keep_known(&self, what: &str, vocab: &BTreeSet<ConceptId>) -> BTreeSet<ConceptId> {
        let (kept, dropped): (BTreeSet<_>, BTreeSet<_>) = vocab.iter().cloned().partition(|c| self.known(c));
        for c in &dropped {
            log::warn!("{what} `{c}` is missing from the knowledge graph or embeddings; dropped");
        }
        kept
    }
}

pub fn run_with_inputs(config: &PipelineConfig, inputs: &Inputs) -> Result<PipelineReport> {
    config.validate()?;
    let mut ctx = Context {
        config,
        graph: &inputs.graph,
        embeddings: &inputs.embeddings,
        targets: None,
        mode: ActionMode::Open {
            hop_bound: config.hop_bound,
        },
    };
    let targets = inputs
        .objects
        .clone()
        .or_else(|| inputs.ground_truth.as_ref().map(GroundTruth::nouns));
    ctx.targets = targets.map(|t| ctx.keep_known("target object", &t));
    if config.mode == Mode::Closed {
        let actions = inputs
            .actions
            .as_ref()
            .ok_or_else(|| Error::Config("closed mode needs an action vocabulary".into()))?;
        ctx.mode = ActionMode::Closed(ctx.keep_known("action", actions));
    }

    let segments = group_segments(inputs.frames.clone());
    let outcomes: Vec<std::result::Result<SegmentResult, SkippedSegment>> = segments
        .par_iter()
        .map(|s| {
            infer_segment(&ctx, s).map_err(|reason| {
                log::warn!("segment `{}` skipped: {reason}", s.id);
                SkippedSegment {
                    segment: s.id.clone(),
                    reason,
                }
            })
        })
        .collect();

    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(s) => skipped.push(s),
        }
    }
    let metrics = evaluate(config, &segments, &results, skipped, inputs.ground_truth.as_ref())?;
    Ok(PipelineReport { results, metrics })
}

fn infer_segment(ctx: &Context, segment: &Segment) -> std::result::Result<SegmentResult, String> {
    let config = ctx.config;
    // keep only labels the knowledge sources know about
    let mut unknown = BTreeSet::new();
    let frames: Vec<DetectionFrame> = segment
        .frames
        .iter()
        .map(|f| {
            let regions: Vec<RegionProposal> = f
                .regions
                .iter()
                .filter_map(|r| {
                    let labels: Vec<_> = r
                        .labels
                        .iter()
                        .filter(|l| {
                            let ok = ctx.known(&l.concept);
                            if !ok {
                                unknown.insert(l.concept.clone());
                            }
                            ok
                        })
                        .cloned()
                        .collect();
                    (!labels.is_empty()).then(|| RegionProposal { labels, ..r.clone() })
                })
                .collect();
            DetectionFrame {
                regions,
                ..f.clone()
            }
        })
        .collect();
    for c in &unknown {
        log::warn!("segment `{}`: detected concept `{c}` is not in the knowledge graph", segment.id);
    }
    let sources: BTreeSet<ConceptId> = frames
        .iter()
        .flat_map(|f| &f.regions)
        .flat_map(|r| &r.labels)
        .map(|l| l.concept.clone())
        .collect();
    if sources.is_empty() {
        return Err("no detected concept is known to the knowledge graph".into());
    }
    let targets = match &ctx.targets {
        Some(t) if !t.is_empty() => t.clone(),
        Some(_) => return Err("target vocabulary is empty".into()),
        None => sources.clone(),
    };
    let mapping = expand_vocabulary(
        ctx.graph,
        ctx.embeddings,
        &sources,
        &targets,
        &config.mapping_params(),
        config.top_k_sources,
    )
    .map_err(|e| e.to_string())?;

    let mut evidence: BTreeMap<ConceptId, f64> = BTreeMap::new();
    let mut previous: Vec<RegionProposal> = Vec::new();
    for frame in &frames {
        let selected = select_regions(frame, &previous, &config.attention);
        for s in &selected {
            for (t, p) in target_distribution(&s.region, s.energy, &mapping, config.attention.e_floor) {
                *evidence.entry(t).or_default() += p;
            }
        }
        previous = selected.into_iter().map(|s| s.region).collect();
    }
    let total: f64 = evidence.values().sum();
    if total.is_nan() || total <= 0.0 {
        return Err("no region survived selection".into());
    }
    let mut objects: Vec<(ConceptId, f64)> = evidence.into_iter().map(|(c, v)| (c, v / total)).collect();
    objects.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    objects.truncate(config.top_k_objects);

    let mut pairs = Vec::new();
    for (target, _) in &objects {
        for m in mapping.ranked(target) {
            pairs.push((m.source.clone(), target.clone()));
        }
    }
    let actions = candidate_actions(
        ctx.graph,
        ctx.embeddings,
        &pairs,
        &ctx.mode,
        config.top_k_actions,
        &config.abduction_params(),
    )
    .map_err(|e| e.to_string())?;
    if actions.is_empty() {
        return Err("no candidate actions".into());
    }

    let grounded: Vec<Generator> = objects
        .iter()
        .map(|(c, p)| (c, *p))
        .chain(actions.iter().map(|a| (&a.action, a.probability)))
        .map(|(c, p)| Generator::grounded(c.clone(), "evidence", p, config.arity.grounded))
        .collect();
    let space = SearchSpace::new(
        ctx.graph,
        objects.iter().map(|(c, p)| Candidate::new(c.clone(), *p)).collect(),
        actions.iter().map(|a| Candidate::new(a.action.clone(), a.probability)).collect(),
        grounded,
        config.connection_types.clone(),
        config.arity,
    )
    .map_err(|e| e.to_string())?;
    let outcome = anneal(&space, &config.anneal, segment_seed(config.seed, &segment.id)).map_err(|e| e.to_string())?;
    let mut interpretations = outcome.interpretations;
    interpretations.truncate(config.max_interpretations);
    let records = interpretations
        .iter()
        .map(|i| {
            Ok(InterpretationRecord {
                segment: segment.id.clone(),
                rank: i.rank,
                noun: i.noun.clone(),
                verb: i.verb.clone(),
                energy: i.energy,
                dot: to_dot(&i.configuration, ctx.graph)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    Ok(SegmentResult {
        segment: segment.id.clone(),
        objects,
        actions,
        interpretations,
        records,
    })
}

/// Distinct labels in rank order.
fn ranked_labels(interps: &[Interpretation], pick: impl Fn(&Interpretation) -> &ConceptId) -> Vec<ConceptId> {
    let mut seen = BTreeSet::new();
    interps
        .iter()
        .map(pick)
        .filter(|c| seen.insert((*c).clone()))
        .cloned()
        .collect()
}

fn evaluate(
    config: &PipelineConfig,
    segments: &[Segment],
    results: &[SegmentResult],
    skipped: Vec<SkippedSegment>,
    ground_truth: Option<&GroundTruth>,
) -> Result<MetricsReport> {
    let mut report = MetricsReport {
        segments: segments.len(),
        skipped,
        ..Default::default()
    };
    let Some(gt) = ground_truth else {
        return Ok(report);
    };
    let by_id: BTreeMap<&str, &SegmentResult> = results.iter().map(|r| (r.segment.as_str(), r)).collect();
    let (mut nouns, mut verbs, mut gt_nouns, mut gt_verbs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for s in segments {
        let Some(a) = gt.get(&s.id) else {
            log::warn!("segment `{}` has no ground truth", s.id);
            continue;
        };
        let interps = by_id.get(s.id.as_str()).map(|r| r.interpretations.as_slice()).unwrap_or(&[]);
        nouns.push(ranked_labels(interps, |i| &i.noun));
        verbs.push(ranked_labels(interps, |i| &i.verb));
        gt_nouns.push(a.noun.clone());
        gt_verbs.push(a.verb.clone());
    }
    report.evaluated = nouns.len();
    if nouns.is_empty() {
        return Ok(report);
    }
    for &k in &config.eval_k {
        let noun_hit = hits_at_k(&nouns, &gt_nouns, k)?;
        let verb_hit = hits_at_k(&verbs, &gt_verbs, k)?;
        let pct = |h: &[bool]| 100.0 * h.iter().filter(|&&x| x).count() as f64 / h.len() as f64;
        report.accuracy.push(AccuracyAtK {
            k,
            noun: pct(&noun_hit),
            verb: pct(&verb_hit),
            activity: activity_accuracy(&noun_hit, &verb_hit)?,
        });
    }
    Ok(report)
}
