//! Annotation sessions: rounds of prompting, expert verdicts and the review
//! state machine.

use crate::catalogs::fine_catalog;
use crate::chat::{ChatClient, ChatMessage, ChatRequest, RequestKind};
use crate::description::ObjectDescription;
use crate::parse::{
    parse_fine_material_response, parse_parameter_response, ParseError, ParsedProposal,
    PartProposal,
};
use crate::prompts::{
    build_feedback_messages, build_fine_material_prompt, build_parameter_prompt,
    fine_material_groups,
};
use crate::validate::{validate_proposal, ValidatedProposal, ValidationMode, Violation};
use crate::AnnotateError;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use simready_core::assets::MaterialParams;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewState {
    /// No parameter proposal yet.
    Created,
    Proposed,
    Simulated,
    Accepted,
    AwaitingRequery,
}

impl ReviewState {
    pub const ALL: [ReviewState; 5] = [
        ReviewState::Created,
        ReviewState::Proposed,
        ReviewState::Simulated,
        ReviewState::Accepted,
        ReviewState::AwaitingRequery,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewEvent {
    Annotate,
    SimulationDone,
    Plausible,
    Implausible,
    Requery,
    /// Re-send the last request after an unusable answer.
    Retry,
    /// Expert sets parameters directly.
    Override,
}

impl ReviewEvent {
    pub const ALL: [ReviewEvent; 7] = [
        ReviewEvent::Annotate,
        ReviewEvent::SimulationDone,
        ReviewEvent::Plausible,
        ReviewEvent::Implausible,
        ReviewEvent::Requery,
        ReviewEvent::Retry,
        ReviewEvent::Override,
    ];
}

/// The review state machine. `None` means the event is not allowed.
pub fn transition(state: ReviewState, event: ReviewEvent) -> Option<ReviewState> {
    use ReviewEvent as E;
    use ReviewState as S;
    match (state, event) {
        (S::Created, E::Annotate) => Some(S::Proposed),
        (S::Proposed, E::SimulationDone) | (S::Simulated, E::SimulationDone) => Some(S::Simulated),
        (S::Simulated, E::Plausible) => Some(S::Accepted),
        (S::Simulated, E::Implausible) => Some(S::AwaitingRequery),
        (S::AwaitingRequery, E::Requery) => Some(S::Proposed),
        (S::Proposed, E::Retry) => Some(S::Proposed),
        (S::Proposed, E::Override) | (S::AwaitingRequery, E::Override) => Some(S::Proposed),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Plausible,
    Implausible,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartComment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub scenario: String,
    pub decision: Decision,
    #[serde(default)]
    pub comments: Vec<PartComment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_id: Option<String>,
    pub timestamp: DateTime<Utc>,
}

impl Verdict {
    /// Comments as one sentence fragment for the feedback prompt.
    pub fn comment_text(&self) -> String {
        self.comments
            .iter()
            .map(|c| c.text.trim().trim_end_matches('.').to_string())
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IterationKind {
    Initial,
    Feedback { scenario: String, comment: String },
    Retry,
    Override,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ValidationOutcome {
    Accepted(ValidatedProposal),
    Rejected { violations: Vec<Violation> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: usize,
    pub kind: IterationKind,
    /// Messages sent; empty for overrides.
    pub messages: Vec<ChatMessage>,
    pub raw_response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<ParsedProposal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<ParseError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationOutcome>,
    #[serde(default)]
    pub verdicts: Vec<Verdict>,
    pub created_at: DateTime<Utc>,
}

impl Iteration {
    pub fn validated(&self) -> Option<&ValidatedProposal> {
        match &self.validation {
            Some(ValidationOutcome::Accepted(v)) => Some(v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineRound {
    pub coarse_material: String,
    pub targets: Vec<String>,
    pub prompt: String,
    pub raw_response: String,
    /// Answers that were adopted.
    pub adopted: Vec<(String, String)>,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSession {
    pub id: String,
    pub description: ObjectDescription,
    pub state: ReviewState,
    pub mode: ValidationMode,
    #[serde(default)]
    pub fine_rounds: Vec<FineRound>,
    #[serde(default)]
    pub iterations: Vec<Iteration>,
    /// Last transport failure; cleared by the next successful round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_error: Option<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl AnnotationSession {
    pub fn new(
        id: &str,
        description: ObjectDescription,
        mode: ValidationMode,
    ) -> Result<Self, AnnotateError> {
        description
            .validate()
            .map_err(AnnotateError::InvalidDescription)?;
        let now = Utc::now();
        Ok(AnnotationSession {
            id: id.to_string(),
            description,
            state: ReviewState::Created,
            mode,
            fine_rounds: vec![],
            iterations: vec![],
            last_error: None,
            created_at: now,
            updated_at: now,
        })
    }

    /// Completed iterations minus one; 0 before the first proposal.
    pub fn rectification_count(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    pub fn latest(&self) -> Option<&Iteration> {
        self.iterations.last()
    }

    /// Materials of the latest iteration, when it validated.
    pub fn current_materials(&self) -> Option<&BTreeMap<String, MaterialParams>> {
        self.latest()
            .and_then(Iteration::validated)
            .map(|v| &v.materials)
    }

    fn fire(&mut self, event: ReviewEvent) -> Result<(), AnnotateError> {
        let next = transition(self.state, event).ok_or(AnnotateError::InvalidTransition {
            from: self.state,
            event,
        })?;
        self.state = next;
        self.updated_at = Utc::now();
        Ok(())
    }

    fn check(&self, event: ReviewEvent) -> Result<(), AnnotateError> {
        transition(self.state, event)
            .map(|_| ())
            .ok_or(AnnotateError::InvalidTransition {
                from: self.state,
                event,
            })
    }

    fn request(
        &self,
        kind: RequestKind,
        messages: Vec<ChatMessage>,
        parts: Vec<crate::PartDescription>,
    ) -> ChatRequest {
        ChatRequest {
            messages,
            kind,
            shape_name: self.description.shape_name.clone(),
            parts,
            round: self.iterations.len(),
        }
    }

    fn send(
        &mut self,
        client: &dyn ChatClient,
        request: &ChatRequest,
    ) -> Result<String, AnnotateError> {
        match client.complete(request) {
            Ok(text) => {
                self.last_error = None;
                Ok(text)
            }
            Err(e) => {
                self.last_error = Some(e.to_string());
                self.updated_at = Utc::now();
                Err(e.into())
            }
        }
    }

    fn append(&mut self, kind: IterationKind, messages: Vec<ChatMessage>, raw: String) {
        let (proposal, parse_error, validation) = match parse_parameter_response(&raw) {
            Ok(p) => {
                let v = match validate_proposal(&self.description, &p, self.mode) {
                    Ok(v) => ValidationOutcome::Accepted(v),
                    Err(violations) => ValidationOutcome::Rejected { violations },
                };
                (Some(p), None, Some(v))
            }
            Err(e) => (None, Some(e), None),
        };
        self.iterations.push(Iteration {
            index: self.iterations.len(),
            kind,
            messages,
            raw_response: raw,
            proposal,
            parse_error,
            validation,
            verdicts: vec![],
            created_at: Utc::now(),
        });
    }

    /// First round: fine-grained materials for parts that need them, then
    /// the parameter request.
    pub fn run_initial_round(&mut self, client: &dyn ChatClient) -> Result<(), AnnotateError> {
        self.check(ReviewEvent::Annotate)?;
        let images = self.description.images.clone();
        let done: Vec<String> = self
            .fine_rounds
            .iter()
            .map(|r| r.coarse_material.clone())
            .collect();
        for (coarse, targets) in fine_material_groups(&self.description) {
            if done.contains(&coarse) {
                continue;
            }
            let names: Vec<&str> = targets.iter().map(String::as_str).collect();
            let prompt = build_fine_material_prompt(&self.description, &names)?;
            let parts = targets
                .iter()
                .filter_map(|t| self.description.part(t).cloned())
                .collect();
            let req = self.request(
                RequestKind::FineMaterial,
                vec![ChatMessage::user(&prompt).with_images(&images)],
                parts,
            );
            let raw = self.send(client, &req)?;
            let round = self.adopt_fine_answers(&coarse, &targets, prompt, raw);
            self.fine_rounds.push(round);
        }

        let prompt = build_parameter_prompt(&self.description);
        let messages = vec![ChatMessage::user(&prompt).with_images(&images)];
        let req = self.request(
            RequestKind::Parameters,
            messages.clone(),
            self.description.parts.clone(),
        );
        let raw = self.send(client, &req)?;
        self.append(IterationKind::Initial, messages, raw);
        self.fire(ReviewEvent::Annotate)
    }

    fn adopt_fine_answers(
        &mut self,
        coarse: &str,
        targets: &[String],
        prompt: String,
        raw: String,
    ) -> FineRound {
        let catalog = fine_catalog(coarse).unwrap_or(&[]);
        let mut adopted = vec![];
        let mut errors = vec![];
        match parse_fine_material_response(&raw) {
            Ok(answers) => {
                for (part, fine) in answers {
                    if !targets.contains(&part) {
                        errors.push(format!("answer for unrequested part `{part}`"));
                    } else if let Some(name) =
                        catalog.iter().find(|c| c.eq_ignore_ascii_case(&fine))
                    {
                        self.description.part_mut(&part).unwrap().fine_material =
                            Some(name.to_string());
                        adopted.push((part, name.to_string()));
                    } else {
                        errors.push(format!(
                            "`{fine}` for part `{part}` is not a listed {coarse} type"
                        ));
                    }
                }
                for t in targets
                    .iter()
                    .filter(|t| !adopted.iter().any(|(p, _)| p == *t))
                {
                    if !errors.iter().any(|e| e.contains(&format!("`{t}`"))) {
                        errors.push(format!("no answer for part `{t}`"));
                    }
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
        FineRound {
            coarse_material: coarse.to_string(),
            targets: targets.to_vec(),
            prompt,
            raw_response: raw,
            adopted,
            errors,
        }
    }

    /// A simulation of the current proposal finished.
    pub fn record_simulation(&mut self) -> Result<(), AnnotateError> {
        self.check(ReviewEvent::SimulationDone)?;
        if self.current_materials().is_none() {
            return Err(AnnotateError::Conflict(
                "the latest proposal did not validate".into(),
            ));
        }
        self.fire(ReviewEvent::SimulationDone)
    }

    pub fn record_verdict(&mut self, verdict: Verdict) -> Result<(), AnnotateError> {
        let event = match verdict.decision {
            Decision::Plausible => ReviewEvent::Plausible,
            Decision::Implausible => ReviewEvent::Implausible,
        };
        self.check(event)?;
        if verdict.decision == Decision::Implausible && verdict.comment_text().is_empty() {
            return Err(AnnotateError::Verdict(
                "an implausible verdict needs at least one comment".into(),
            ));
        }
        if verdict.decision == Decision::Implausible
            && crate::prompts::test_case_description(&verdict.scenario).is_none()
        {
            return Err(AnnotateError::Verdict(format!(
                "unknown scenario `{}`",
                verdict.scenario
            )));
        }
        self.iterations.last_mut().unwrap().verdicts.push(verdict);
        self.fire(event)
    }

    /// The feedback thread for the latest implausible verdict.
    pub fn feedback_messages(&self) -> Result<[ChatMessage; 3], AnnotateError> {
        let first = self
            .iterations
            .first()
            .ok_or_else(|| AnnotateError::Conflict("no prior iteration".into()))?;
        let latest = self.latest().unwrap();
        let verdict = latest
            .verdicts
            .iter()
            .rev()
            .find(|v| v.decision == Decision::Implausible)
            .ok_or_else(|| AnnotateError::Conflict("no implausible verdict to act on".into()))?;
        let original = first
            .messages
            .first()
            .map(|m| m.text.clone())
            .unwrap_or_else(|| build_parameter_prompt(&self.description));
        build_feedback_messages(
            &original,
            &self.description.images,
            &latest.raw_response,
            &verdict.scenario,
            &verdict.comment_text(),
        )
    }

    /// Sends the expert's feedback and records the new proposal.
    pub fn run_feedback_round(&mut self, client: &dyn ChatClient) -> Result<(), AnnotateError> {
        self.check(ReviewEvent::Requery)?;
        let messages = self.feedback_messages()?.to_vec();
        let verdict = self
            .latest()
            .unwrap()
            .verdicts
            .iter()
            .rev()
            .find(|v| v.decision == Decision::Implausible)
            .unwrap()
            .clone();
        let req = self.request(
            RequestKind::Feedback,
            messages.clone(),
            self.description.parts.clone(),
        );
        let raw = self.send(client, &req)?;
        self.append(
            IterationKind::Feedback {
                scenario: verdict.scenario.clone(),
                comment: verdict.comment_text(),
            },
            messages,
            raw,
        );
        self.fire(ReviewEvent::Requery)
    }

    /// Re-sends the latest request when its answer could not be used.
    pub fn retry_round(&mut self, client: &dyn ChatClient) -> Result<(), AnnotateError> {
        self.check(ReviewEvent::Retry)?;
        let latest = self.latest().unwrap();
        if latest.validated().is_some() {
            return Err(AnnotateError::Conflict(
                "the latest proposal is valid".into(),
            ));
        }
        if latest.messages.is_empty() {
            return Err(AnnotateError::Conflict(
                "an override cannot be retried".into(),
            ));
        }
        let messages = latest.messages.clone();
        let kind = if messages.len() == 3 {
            RequestKind::Feedback
        } else {
            RequestKind::Parameters
        };
        let req = self.request(kind, messages.clone(), self.description.parts.clone());
        let raw = self.send(client, &req)?;
        self.append(IterationKind::Retry, messages, raw);
        self.fire(ReviewEvent::Retry)
    }

    /// Direct parameter edit by an expert, validated like a model answer.
    pub fn apply_override(
        &mut self,
        materials: &BTreeMap<String, MaterialParams>,
    ) -> Result<(), AnnotateError> {
        self.check(ReviewEvent::Override)?;
        let proposal = ParsedProposal {
            parts: materials
                .iter()
                .map(|(part, m)| {
                    let mut params = BTreeMap::from([
                        ("E".to_string(), m.youngs_modulus),
                        ("nu".to_string(), m.poisson_ratio),
                        ("rho".to_string(), m.density),
                    ]);
                    if let Some(s) = m.yield_stress {
                        params.insert("sigma_y".into(), s);
                    }
                    if let Some(phi) = m.friction_angle {
                        params.insert("phi".into(), phi);
                    }
                    PartProposal {
                        part: part.clone(),
                        cid: m.behavior.as_str().to_string(),
                        params,
                    }
                })
                .collect(),
            warnings: vec![],
        };
        let validated = validate_proposal(&self.description, &proposal, ValidationMode::Strict)
            .map_err(|v| {
                AnnotateError::InvalidOverride(v.iter().map(|x| x.to_string()).collect())
            })?;
        // the override becomes the "previous answer" of any later feedback round
        let raw = serde_json::to_string_pretty(&proposal_json(&proposal)).unwrap();
        self.iterations.push(Iteration {
            index: self.iterations.len(),
            kind: IterationKind::Override,
            messages: vec![],
            raw_response: raw,
            proposal: Some(proposal),
            parse_error: None,
            validation: Some(ValidationOutcome::Accepted(validated)),
            verdicts: vec![],
            created_at: Utc::now(),
        });
        self.fire(ReviewEvent::Override)
    }
}

fn proposal_json(p: &ParsedProposal) -> serde_json::Value {
    let mut out = serde_json::Map::new();
    for part in &p.parts {
        let mut entry = serde_json::Map::new();
        entry.insert("CID".into(), part.cid.clone().into());
        for key in crate::parse::KNOWN_PARAMETERS {
            if let Some(v) = part.params.get(key) {
                entry.insert(key.into(), (*v).into());
            }
        }
        out.insert(part.part.clone(), entry.into());
    }
    out.into()
}
