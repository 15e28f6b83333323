//! The propagation loop. Each step: sample activations, expose newcomers,
//! collect decisions from the backend, apply them in agent order, run the
//! opinion update among exposed agents, refresh both mean fields, record.

mod decision;
mod post;
mod trace;

pub use decision::{build_decision_prompt, parse_decision, DecisionOutcome, DecisionParseError};
pub use post::{read_posts, write_posts, PostError, UgcPost};
pub use trace::{
    extract_features, opinion_digest, read_trace, write_trace, ActionHistogram,
    PropagationFeatures, PropagationTrace, StepRecord, TraceError,
};

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::backend::{
    complete_tracked, BackendError, CallSite, ChatBackend, ChatMessage, ChatRequest, UsageLedger,
};
use crate::config::{SimConfig, SimMode};
use crate::dynamics::{
    activation_profile, deffuant_step_among, interest_bag, numeric_mean_field, sample_activated,
    DynamicsConfig,
};
use crate::meanfield::{
    summarize_mean_field, textualize_action, ActionKind, AgentAction, TextMeanFieldState,
};
use crate::population::{
    generate_graph, AgentState, MemoryEntry, MemoryKind, ParticipationClass, Population,
    PopulationError, SocialGraph,
};
use crate::prompt::PromptSet;
use crate::util::rng::sub_seed;
use crate::util::text::token_bag;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("population has {population} agents but the graph has {graph}")]
    SizeMismatch { population: u32, graph: u32 },
    #[error("backend failure at step {step}: {source}")]
    Backend {
        step: u32,
        #[source]
        source: BackendError,
        /// Steps finished before the failure, marked incomplete.
        partial: Box<PropagationTrace>,
    },
}

/// Shared services a run needs.
pub struct SimHandles<'a> {
    pub backend: &'a dyn ChatBackend,
    pub ledger: &'a UsageLedger,
    pub prompts: &'a PromptSet,
}

/// Builds the roster and follow graph from the config's master seed. The
/// canonical wiring: personas, classes and edges each draw from their own
/// tagged stream, so any artifact can be regenerated independently.
pub fn build_world(cfg: &SimConfig) -> Result<(Population, SocialGraph), PopulationError> {
    let split = [cfg.split_lurker, cfg.split_contributor, cfg.split_creator];
    let population = Population::generate(cfg.n_agents, split, cfg.seed, cfg.alpha_inactive)?;
    let graph = generate_graph(cfg.n_agents, cfg.attach_m, sub_seed(cfg.seed, "graph"))?;
    Ok((population, graph))
}

fn base_activation(class: ParticipationClass, cfg: &SimConfig) -> f64 {
    match class {
        ParticipationClass::Lurker => cfg.activation_lurker,
        ParticipationClass::Contributor => cfg.activation_contributor,
        ParticipationClass::Creator => cfg.activation_creator,
    }
}

fn smf_context(m_num: f64, text: &TextMeanFieldState) -> String {
    let summary = if text.summary.is_empty() { "(none yet)" } else { text.summary.as_str() };
    format!(
        "Network pulse: the average opinion across the network is {m_num:.2} on the 0 to 10 scale.\n\
         Propagation summary: {summary}"
    )
}

/// Uncompressed context: every feed source with profile, stance and full
/// action history. Deliberately verbose; this is the baseline the summary
/// mode is measured against.
fn standard_context(
    agent: &AgentState,
    graph: &SocialGraph,
    agents: &[AgentState],
    action_log: &[Vec<String>],
) -> String {
    let mut block = String::from("Your feed sources right now:\n");
    for &j in graph.following(agent.id) {
        let n = &agents[j as usize];
        let history = if action_log[j as usize].is_empty() {
            "no recorded activity".to_string()
        } else {
            action_log[j as usize].join("; ")
        };
        block.push_str(&format!(
            "- {} ({} {}; interests: {}; personality: {}): stance {:.1} of 10; activity so far: {}\n",
            n.persona.name,
            n.persona.gender,
            n.persona.occupation,
            n.persona.interests.join(", "),
            n.persona.personality.join(", "),
            n.opinion,
            history,
        ));
    }
    block
}

/// Own-perspective sentence for the actor's memory.
fn own_action_note(action: &AgentAction) -> String {
    let target = action.target.as_deref().unwrap_or_default();
    let content = action.content.as_deref().unwrap_or_default();
    match action.kind {
        ActionKind::Post => format!("You posted: {content}"),
        ActionKind::Retweet => format!("You retweeted post {target}"),
        ActionKind::Reply => format!("You replied to post {target}: {content}"),
        ActionKind::Like => format!("You liked post {target}"),
        ActionKind::DoNothing => "You did nothing".to_string(),
    }
}

struct DecisionJob {
    agent_id: u32,
    prompt: String,
    prior_opinion: f64,
}

/// Decision with one reprompt on malformed output, then a do-nothing
/// fallback that keeps the prior opinion. Returns whether the fallback was
/// used.
fn decide_one(
    job: &DecisionJob,
    focal_post: &str,
    cfg: &SimConfig,
    handles: &SimHandles,
) -> Result<(DecisionOutcome, bool), BackendError> {
    let first = ChatRequest::new(
        CallSite::Decision,
        cfg,
        vec![ChatMessage::user(job.prompt.clone())],
    );
    let response = complete_tracked(handles.backend, handles.ledger, &first)?;
    if let Ok(outcome) = parse_decision(&response.text, job.agent_id, focal_post) {
        return Ok((outcome, false));
    }
    let retry = ChatRequest::new(
        CallSite::Decision,
        cfg,
        vec![
            ChatMessage::user(job.prompt.clone()),
            ChatMessage::assistant(response.text),
            ChatMessage::user(handles.prompts.reprompt_decision.clone()),
        ],
    );
    let second = complete_tracked(handles.backend, handles.ledger, &retry)?;
    match parse_decision(&second.text, job.agent_id, focal_post) {
        Ok(outcome) => Ok((outcome, false)),
        Err(err) => {
            log::warn!(
                "agent {} answer unusable after reprompt ({err}); falling back to do_nothing",
                job.agent_id
            );
            let action = AgentAction {
                agent_id: job.agent_id,
                kind: ActionKind::DoNothing,
                target: None,
                content: None,
            };
            Ok((DecisionOutcome { action, opinion: job.prior_opinion }, true))
        }
    }
}

/// Runs decision jobs, possibly across worker threads. Results come back in
/// job order, so downstream application is independent of scheduling.
fn run_decisions(
    jobs: &[DecisionJob],
    focal_post: &str,
    cfg: &SimConfig,
    handles: &SimHandles,
) -> Result<Vec<(DecisionOutcome, bool)>, BackendError> {
    if jobs.is_empty() {
        return Ok(Vec::new());
    }
    let workers = cfg.concurrency_limit.min(jobs.len());
    if workers <= 1 {
        return jobs.iter().map(|job| decide_one(job, focal_post, cfg, handles)).collect();
    }
    let slots: Vec<Mutex<Option<Result<(DecisionOutcome, bool), BackendError>>>> =
        (0..jobs.len()).map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = cursor.fetch_add(1, Ordering::Relaxed);
                if idx >= jobs.len() {
                    break;
                }
                let result = decide_one(&jobs[idx], focal_post, cfg, handles);
                *slots[idx].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("worker filled slot"))
        .collect()
}

/// Simulates one post through `cfg.rounds` steps and returns the trace.
/// Deterministic for a given (config, population, graph, seed) when the
/// backend is a pure function of the request.
pub fn run_simulation(
    post: &UgcPost,
    population: &Population,
    graph: &SocialGraph,
    cfg: &SimConfig,
    sim_seed: u64,
    handles: &SimHandles,
) -> Result<PropagationTrace, SimError> {
    if population.len() != graph.len() {
        return Err(SimError::SizeMismatch { population: population.len(), graph: graph.len() });
    }
    let n = population.len() as usize;
    let dyn_cfg = DynamicsConfig {
        epsilon: cfg.epsilon,
        alpha_active: cfg.alpha_active,
        alpha_inactive: cfg.alpha_inactive,
    };

    // Fresh runtime state; the caller's roster is never mutated.
    let mut agents: Vec<AgentState> = population.agents.clone();
    for agent in &mut agents {
        agent.opinion = 0.0;
        agent.influence_weight = cfg.alpha_inactive;
        agent.memory.clear();
        agent.exposed = false;
        agent.activated = false;
    }
    let names: Vec<String> = agents.iter().map(|a| a.persona.name.clone()).collect();

    let mut opinions = vec![0.0f64; n];
    let mut weights = vec![cfg.alpha_inactive; n];
    let mut exposed = vec![false; n];
    // Textualized non-silent actions per agent, for the uncompressed context.
    let mut action_log: Vec<Vec<String>> = vec![Vec::new(); n];
    // Posts authored inside the sandbox, for routing notifications.
    let mut derived_posts: HashMap<String, u32> = HashMap::new();
    let mut text_state = TextMeanFieldState::initial();
    let mut m_num_prev = 0.0f64;
    // (agent to expose, who shared it) pairs produced by last step's retweets.
    let mut frontier: Vec<(u32, u32)> = Vec::new();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut warnings = 0u32;

    let bases: Vec<f64> = agents.iter().map(|a| base_activation(a.class, cfg)).collect();
    let interest_bags: Vec<_> = agents.iter().map(|a| interest_bag(&a.persona.interests)).collect();
    let post_bag = token_bag([post.text.as_str()]);
    let probs = activation_profile(&bases, &interest_bags, &post_bag);

    let partial = |steps: &[StepRecord], opinions: &[f64], warnings: u32| PropagationTrace {
        post_id: post.id.clone(),
        seed: sim_seed,
        mode: cfg.mode,
        n_agents: n as u32,
        rounds: cfg.rounds,
        config_digest: cfg.digest(),
        steps: steps.to_vec(),
        final_opinions: opinions.to_vec(),
        warnings,
        complete: false,
    };

    for step in 1..=cfg.rounds {
        // (1) Activation draws, keyed by (seed, step, agent).
        let activated = sample_activated(&probs, sim_seed, step);

        // (2) Exposure. First the retweet frontier from last step, then
        // anyone activating for the first time.
        for (id, via) in frontier.drain(..) {
            let i = id as usize;
            if exposed[i] {
                continue;
            }
            exposed[i] = true;
            agents[i].exposed = true;
            let note = format!(
                "Post {} (shared by {}): {}",
                post.id, names[via as usize], post.text
            );
            agents[i].remember(
                MemoryEntry { step, kind: MemoryKind::ReceivedUgc, content: note },
                cfg.memory_capacity,
            );
        }
        for i in 0..n {
            agents[i].activated = activated[i];
            weights[i] = if activated[i] { cfg.alpha_active } else { cfg.alpha_inactive };
            agents[i].influence_weight = weights[i];
            if activated[i] && !exposed[i] {
                exposed[i] = true;
                agents[i].exposed = true;
                let note = format!("Post {}: {}", post.id, post.text);
                agents[i].remember(
                    MemoryEntry { step, kind: MemoryKind::ReceivedUgc, content: note },
                    cfg.memory_capacity,
                );
            }
        }

        // (3) Decision prompts against the pre-step snapshot.
        let jobs: Vec<DecisionJob> = (0..n)
            .filter(|&i| activated[i])
            .map(|i| {
                let context = match cfg.mode {
                    SimMode::Smf => smf_context(m_num_prev, &text_state),
                    SimMode::Standard => standard_context(&agents[i], graph, &agents, &action_log),
                };
                DecisionJob {
                    agent_id: i as u32,
                    prompt: build_decision_prompt(
                        &agents[i],
                        post,
                        &context,
                        handles.prompts,
                        cfg.memory_capacity,
                    ),
                    prior_opinion: agents[i].opinion,
                }
            })
            .collect();
        let outcomes = match run_decisions(&jobs, &post.id, cfg, handles) {
            Ok(outcomes) => outcomes,
            Err(source) => {
                return Err(SimError::Backend {
                    step,
                    source,
                    partial: Box::new(partial(&steps, &opinions, warnings)),
                });
            }
        };

        // (4) Apply outcomes in ascending agent id.
        let mut step_actions: Vec<AgentAction> = Vec::with_capacity(outcomes.len());
        let mut action_texts: Vec<String> = Vec::new();
        let mut notifications: Vec<(u32, String)> = Vec::new();
        let mut frontier_next: Vec<(u32, u32)> = Vec::new();
        for (job, (outcome, fell_back)) in jobs.iter().zip(outcomes) {
            let i = job.agent_id as usize;
            if fell_back {
                warnings += 1;
            }
            opinions[i] = outcome.opinion;
            agents[i].opinion = outcome.opinion;
            let action = outcome.action;
            if !action.is_silent() {
                let sentence = textualize_action(&action, &names)
                    .expect("validated actions textualize");
                agents[i].remember(
                    MemoryEntry {
                        step,
                        kind: MemoryKind::OwnAction,
                        content: own_action_note(&action),
                    },
                    cfg.memory_capacity,
                );
                match action.kind {
                    ActionKind::Post => {
                        let derived = format!("{}-s{}-a{}", post.id, step, job.agent_id);
                        derived_posts.insert(derived, job.agent_id);
                    }
                    ActionKind::Retweet => {
                        for &f in graph.followers(job.agent_id) {
                            if !exposed[f as usize] {
                                frontier_next.push((f, job.agent_id));
                            }
                        }
                    }
                    ActionKind::Reply | ActionKind::Like => {}
                    ActionKind::DoNothing => unreachable!(),
                }
                if let Some(target) = action.target.as_deref() {
                    if let Some(&author) = derived_posts.get(target) {
                        if author != job.agent_id {
                            let note = match action.kind {
                                ActionKind::Like => {
                                    format!("{} liked your post {target}", names[i])
                                }
                                ActionKind::Reply => format!(
                                    "{} replied to your post {target}: {}",
                                    names[i],
                                    action.content.as_deref().unwrap_or_default()
                                ),
                                _ => format!("{} retweeted your post {target}", names[i]),
                            };
                            notifications.push((author, note));
                        }
                    }
                }
                if cfg.mode == SimMode::Standard {
                    // Uncompressed mode delivers raw peer activity into
                    // follower memories; summary mode compresses it away.
                    for &f in graph.followers(job.agent_id) {
                        notifications.push((f, format!("From your feed: {sentence}")));
                    }
                }
                action_log[i].push(sentence.clone());
                action_texts.push(sentence);
            }
            if cfg.mode == SimMode::Smf {
                agents[i].remember(
                    MemoryEntry {
                        step,
                        kind: MemoryKind::ObservedMeanField,
                        content: smf_context(m_num_prev, &text_state),
                    },
                    cfg.memory_capacity,
                );
            }
            step_actions.push(action);
        }
        for (target, note) in notifications {
            agents[target as usize].remember(
                MemoryEntry { step, kind: MemoryKind::ReceivedUgc, content: note },
                cfg.memory_capacity,
            );
        }
        frontier = frontier_next;

        // (5) Opinion update among exposed agents only; the unexposed hold
        // exactly 0 and are inaudible.
        opinions = deffuant_step_among(&opinions, graph, &weights, &dyn_cfg, &exposed)
            .expect("lengths checked at entry");
        for (agent, &o) in agents.iter_mut().zip(&opinions) {
            agent.opinion = o;
        }

        // (6) Numerical mean field over the whole population.
        let m_num = numeric_mean_field(&opinions).expect("population is non-empty");

        // (7) Textual mean field; only summary mode spends a call.
        let m_text = match cfg.mode {
            SimMode::Smf => {
                text_state = match summarize_mean_field(
                    &text_state,
                    &action_texts,
                    &post.text,
                    handles.backend,
                    handles.ledger,
                    handles.prompts,
                    cfg,
                ) {
                    Ok(state) => state,
                    Err(source) => {
                        return Err(SimError::Backend {
                            step,
                            source,
                            partial: Box::new(partial(&steps, &opinions, warnings)),
                        });
                    }
                };
                text_state.summary.clone()
            }
            SimMode::Standard => String::new(),
        };

        steps.push(StepRecord {
            step,
            activated: (0..n as u32).filter(|&i| activated[i as usize]).collect(),
            actions: step_actions,
            m_num,
            m_text,
            opinion_digest: opinion_digest(&opinions),
        });
        m_num_prev = m_num;
    }

    Ok(PropagationTrace {
        post_id: post.id.clone(),
        seed: sim_seed,
        mode: cfg.mode,
        n_agents: n as u32,
        rounds: cfg.rounds,
        config_digest: cfg.digest(),
        steps,
        final_opinions: opinions,
        warnings,
        complete: true,
    })
}
