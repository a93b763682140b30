//! Optional refinement of templated instructions by external text models.
//!
//! Three roles are consulted in turn: a describer captions the target from a
//! summary of what is visible along the path (and may rewrite the fine
//! instruction), a verifier confirms which spatial relation to keep, and a
//! synthesizer rewrites the coarse styles. Every reply is validated; on any
//! failure the templated text stays in place.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::env::{Relation, SceneContext};
use crate::geometry::WorldPoint;
use crate::sim::{sense, Pose};

use super::episode::{CoarseInstructions, Episode, InstructionBundle};
use super::instructions::{
    coarse_from_parts, describe_target, landmark_vocabulary, target_room_label,
    validate_fine_instruction,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Describer,
    Verifier,
    Synthesizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRequest {
    pub role: Role,
    pub prompt: String,
    pub context: Value,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefinementError {
    #[error("refinement client timed out")]
    ClientTimeout,
    #[error("refinement transport failed: {0}")]
    Transport(String),
    #[error("refinement reply failed validation: {0}")]
    SchemaInvalid(String),
}

/// A text model behind some transport. Implementations return the raw reply text.
pub trait RefinementClient: Send + Sync {
    fn complete(&self, request: &RefinementRequest) -> Result<String, RefinementError>;
}

#[derive(Clone, Default)]
pub struct RefinementClients {
    pub describer: Option<Arc<dyn RefinementClient>>,
    pub verifier: Option<Arc<dyn RefinementClient>>,
    pub synthesizer: Option<Arc<dyn RefinementClient>>,
}

impl RefinementClients {
    pub fn is_empty(&self) -> bool {
        self.describer.is_none() && self.verifier.is_none() && self.synthesizer.is_none()
    }

    /// The same client for every role.
    pub fn uniform(client: Arc<dyn RefinementClient>) -> Self {
        Self {
            describer: Some(client.clone()),
            verifier: Some(client.clone()),
            synthesizer: Some(client),
        }
    }
}

/// Facts handed to the clients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RefineContext {
    pub target_label: Option<String>,
    pub room_label: Option<String>,
    /// Scene-graph relation of the target and its reference label.
    pub prior: Option<(Relation, String)>,
    /// Labels seen along the reference path, in order of first sighting.
    pub seen_along_path: Vec<String>,
    pub landmarks: Vec<String>,
}

impl RefineContext {
    pub fn for_episode(ctx: &SceneContext, episode: &Episode) -> Self {
        let scene = &ctx.scene;
        let target = episode
            .goals
            .last()
            .and_then(|g| g.target_object_id.as_deref());
        let mut seen: Vec<String> = Vec::new();
        let mut last: Option<WorldPoint> = None;
        for w in &episode.reference_path.waypoints {
            if last.is_some_and(|l| l.distance(w) < 1.0) {
                continue;
            }
            last = Some(*w);
            for d in sense(ctx, Pose::new(w.x, w.y, 0.0), 0, false).detections {
                if !seen.contains(&d.label) {
                    seen.push(d.label);
                }
            }
        }
        Self {
            target_label: target.and_then(|t| scene.object(t)).map(|o| o.label.clone()),
            room_label: target.map(|t| target_room_label(scene, &ctx.graph, t)),
            prior: target.and_then(|t| describe_target(scene, &ctx.graph, t)),
            seen_along_path: seen,
            landmarks: landmark_vocabulary(scene),
        }
    }
}

const UNINFORMATIVE: &[&str] = &[
    "not clearly visible",
    "not visible",
    "unclear",
    "cannot see",
    "can't see",
    "cannot be seen",
    "unable to",
    "not sure",
    "unknown",
    "obscured",
];

fn padded(text: &str) -> String {
    let norm: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    format!(" {} ", norm.split_whitespace().collect::<Vec<_>>().join(" "))
}

/// A caption is informative when it is non-empty and does not hedge about
/// visibility.
pub fn caption_is_informative(caption: &str) -> bool {
    let lower = caption.to_lowercase();
    !caption.trim().is_empty() && !UNINFORMATIVE.iter().any(|u| lower.contains(u))
}

/// First spatial relation phrase in the caption.
pub fn caption_relation(caption: &str) -> Option<Relation> {
    let text = padded(caption);
    const PHRASES: &[(&str, Relation)] = &[
        (" on top of ", Relation::On),
        (" on ", Relation::On),
        (" near ", Relation::Near),
        (" next to ", Relation::Near),
        (" beside ", Relation::Near),
        (" close to ", Relation::Near),
        (" inside ", Relation::In),
        (" in ", Relation::In),
    ];
    PHRASES
        .iter()
        .filter_map(|(p, r)| text.find(p).map(|i| (i, *r)))
        .min_by_key(|(i, _)| *i)
        .map(|(_, r)| r)
}

/// Keep the prior relation unless the caption is informative, names both
/// the target and the reference, and states a relation of its own.
pub fn fuse_relation(prior: Relation, target: &str, reference: &str, caption: &str) -> Relation {
    let text = padded(caption);
    let names = |label: &str| text.contains(&padded(label));
    if caption_is_informative(caption) && names(target) && names(reference) {
        caption_relation(caption).unwrap_or(prior)
    } else {
        prior
    }
}

/// Strictly parse a synthesizer reply: a JSON object with exactly the keys
/// `formal`, `natural` and `casual`, each a distinct non-empty string naming
/// the target.
pub fn parse_synthesizer_reply(text: &str, target: &str) -> Result<CoarseInstructions, RefinementError> {
    let invalid = |m: &str| RefinementError::SchemaInvalid(m.to_string());
    let value: Value = serde_json::from_str(text.trim()).map_err(|e| invalid(&e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| invalid("reply is not an object"))?;
    if obj.len() != 3 {
        return Err(invalid("expected exactly three keys"));
    }
    let field = |k: &str| -> Result<String, RefinementError> {
        let s = obj
            .get(k)
            .and_then(Value::as_str)
            .ok_or_else(|| invalid(&format!("missing string `{k}`")))?
            .trim()
            .to_string();
        if s.is_empty() || s.len() > 400 {
            return Err(invalid(&format!("`{k}` empty or too long")));
        }
        if !s.to_lowercase().contains(&target.to_lowercase()) {
            return Err(invalid(&format!("`{k}` does not name the target")));
        }
        Ok(s)
    };
    let c = CoarseInstructions {
        formal: field("formal")?,
        natural: field("natural")?,
        casual: field("casual")?,
    };
    if c.formal == c.natural || c.formal == c.casual || c.natural == c.casual {
        return Err(invalid("styles must differ"));
    }
    Ok(c)
}

fn parse_verifier_reply(text: &str) -> Result<Relation, RefinementError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Reply {
        relation: Relation,
    }
    serde_json::from_str::<Reply>(text.trim())
        .map(|r| r.relation)
        .map_err(|e| RefinementError::SchemaInvalid(e.to_string()))
}

fn ask(client: &Option<Arc<dyn RefinementClient>>, role: Role, prompt: String, context: Value) -> Option<String> {
    let client = client.as_ref()?;
    let req = RefinementRequest { role, prompt, context };
    match client.complete(&req) {
        Ok(text) => Some(text),
        Err(e) => {
            log::warn!("{role:?} refinement failed: {e}");
            None
        }
    }
}

fn caption_prompt(c: &RefineContext, target: &str) -> String {
    format!(
        "You are shown what an agent saw while walking a route, listed as object labels: {}. \
         In one sentence, say where the {target} is relative to nearby objects. \
         If you cannot tell, say that the {target} is not clearly visible.",
        c.seen_along_path.join(", ")
    )
}

fn verifier_prompt(prior: (Relation, &str), target: &str, caption: &str, fused: Relation) -> String {
    format!(
        "Scene records say the {target} is {} the {}. A caption says: \"{caption}\". \
         Keep the recorded relation unless the caption clearly describes the {target} and the {} \
         with a different relation. Reply with JSON only, like {{\"relation\": \"{}\"}}.",
        prior.0.phrase(),
        prior.1,
        prior.1,
        fused.as_str()
    )
}

fn synthesizer_prompt(room: &str, target: &str, rel: Relation, reference: &str) -> String {
    format!(
        "Write three short navigation instructions telling someone to go to the {room} and find \
         the {target} ({} the {reference}). Use three styles: formal complete sentences, polite \
         natural phrasing, and casual fragments. Answer with only a JSON object with the keys \
         \"formal\", \"natural\" and \"casual\".",
        rel.phrase()
    )
}

fn fine_prompt(c: &RefineContext, template: &str) -> String {
    format!(
        "Rewrite this route description as second-person imperative steps. Keep every landmark, \
         every left/right term and the final stop instruction; do not describe moving backward. \
         Objects seen along the way: {}. Route: {template}",
        c.seen_along_path.join(", ")
    )
}

/// Refine `bundle` with whatever clients are configured. Never fails: every
/// client error or invalid reply leaves the corresponding field templated.
pub fn refine(bundle: &InstructionBundle, c: &RefineContext, clients: &RefinementClients) -> InstructionBundle {
    let mut out = bundle.clone();
    if clients.is_empty() {
        return out;
    }
    let context = serde_json::to_value(c).unwrap_or(Value::Null);

    if let Some(fine) = &bundle.fine {
        if let Some(reply) = ask(&clients.describer, Role::Describer, fine_prompt(c, fine), context.clone()) {
            let check = validate_fine_instruction(reply.trim(), &c.landmarks);
            if check.passes() {
                out.fine = Some(reply.trim().to_string());
            } else {
                log::warn!("describer fine instruction rejected: {check:?}");
            }
        }
    }

    let (Some(coarse), Some(target), Some(room), Some((prior, reference))) = (
        &bundle.coarse,
        c.target_label.as_deref(),
        c.room_label.as_deref(),
        c.prior.as_ref().map(|(r, s)| (*r, s.as_str())),
    ) else {
        return out;
    };

    let mut relation = prior;
    if let Some(caption) = ask(&clients.describer, Role::Describer, caption_prompt(c, target), context.clone()) {
        relation = fuse_relation(prior, target, reference, &caption);
        if let Some(reply) = ask(
            &clients.verifier,
            Role::Verifier,
            verifier_prompt((prior, reference), target, &caption, relation),
            json!({ "caption": caption, "prior": prior, "reference": reference }),
        ) {
            match parse_verifier_reply(&reply) {
                Ok(r) if r == relation => {}
                Ok(r) => log::warn!("verifier proposed {r} against the fusion rule; keeping {relation}"),
                Err(e) => log::warn!("verifier reply rejected: {e}"),
            }
        }
    }

    let templated = if relation == prior {
        coarse.clone()
    } else {
        coarse_from_parts(room, target, Some((relation, reference)))
    };
    out.coarse = Some(templated);
    if let Some(reply) = ask(
        &clients.synthesizer,
        Role::Synthesizer,
        synthesizer_prompt(room, target, relation, reference),
        context,
    ) {
        match parse_synthesizer_reply(&reply, target) {
            Ok(styles) => out.coarse = Some(styles),
            Err(e) => log::warn!("synthesizer reply rejected: {e}"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fusion_keeps_prior_for_hedged_caption() {
        let r = fuse_relation(Relation::On, "cup", "table", "Target object cup not clearly visible.");
        assert_eq!(r, Relation::On);
    }

    #[test]
    fn fusion_takes_caption_relation_when_pair_named() {
        let r = fuse_relation(Relation::On, "cup", "table", "The cup sits next to the table.");
        assert_eq!(r, Relation::Near);
        // wrong reference object: prior kept
        let r = fuse_relation(Relation::On, "cup", "table", "The cup is next to the sink.");
        assert_eq!(r, Relation::On);
    }

    #[test]
    fn synthesizer_reply_is_strict() {
        let ok = r#"{"formal":"Go to the cup.","natural":"Please find the cup.","casual":"Cup, kitchen."}"#;
        assert!(parse_synthesizer_reply(ok, "cup").is_ok());
        let extra = r#"{"formal":"a cup","natural":"b cup","casual":"c cup","x":"d"}"#;
        assert!(parse_synthesizer_reply(extra, "cup").is_err());
        assert!(parse_synthesizer_reply("Sure! {\"formal\":\"x\"}", "cup").is_err());
        let missing_target = r#"{"formal":"a","natural":"b","casual":"c"}"#;
        assert!(parse_synthesizer_reply(missing_target, "cup").is_err());
    }
}
