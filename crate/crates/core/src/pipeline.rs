//! Glue between a validated [`Config`] and the library: corpus loading and
//! adapter resolution.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;

use crate::config::{default_mock_kind, Config};
use crate::corpus::{ingest_corpus, Document};
use crate::mockdata::mock_documents;
use crate::synth::mock::mock_kind_technology;
use crate::synth::{connect, AdapterEndpoint, AdapterHandle};
use crate::taxonomy::{SourceSpec, TechnologyType};

/// Human documents named by the config: the ingested file when a path is
/// set, template documents otherwise.
pub fn load_corpus(config: &Config) -> Result<Vec<Document>, String> {
    match &config.corpus.path {
        Some(path) => {
            let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let outcome = ingest_corpus(BufReader::new(file), "default")
                .map_err(|e| format!("{}: {e}", path.display()))?;
            for err in &outcome.errors {
                log::warn!("{}: {err}", path.display());
            }
            Ok(outcome.documents)
        }
        None => Ok(mock_documents(
            config.seed,
            config.corpus.mock_documents,
            config.corpus.domain,
        )),
    }
}

/// The plan with every synthetic source bound to its default mock adapter.
pub fn force_mock_plan(plan: &[SourceSpec]) -> Vec<SourceSpec> {
    plan.iter()
        .map(|s| {
            let mut s = s.clone();
            if !s.label.is_real() {
                s.adapter = format!("mock:{}", default_mock_kind(s.label.tech, s.procedure));
            }
            s
        })
        .collect()
}

/// Endpoint description for a binding: a configured endpoint id or `mock:<kind>`.
pub fn endpoint_for(config: &Config, binding: &str) -> Result<AdapterEndpoint, String> {
    if let Some(kind) = binding.strip_prefix("mock:") {
        let tech = mock_kind_technology(kind).ok_or_else(|| format!("unknown mock kind {kind:?}"))?;
        return Ok(AdapterEndpoint::mock(binding, tech, kind));
    }
    config
        .endpoint(binding)
        .cloned()
        .ok_or_else(|| format!("no adapter endpoint with id {binding:?}"))
}

/// Connect one binding. HTTP endpoints must pass a health check.
pub fn connect_binding(config: &Config, binding: &str, human_texts: &[&str]) -> Result<AdapterHandle, String> {
    let endpoint = endpoint_for(config, binding)?;
    let handle = connect(&endpoint, human_texts.iter().copied())?;
    if !endpoint.is_mock() {
        let health = handle.client.health().map_err(|e| e.to_string())?;
        log::info!("endpoint {} serves {}", endpoint.id, health.model_name);
    }
    Ok(handle)
}

/// Connect every adapter binding used by the synthetic rows of `plan`.
pub fn resolve_adapters(
    config: &Config,
    plan: &[SourceSpec],
    human_texts: &[&str],
) -> Result<HashMap<String, AdapterHandle>, String> {
    let mut handles = HashMap::new();
    for spec in plan.iter().filter(|s| s.label.tech != TechnologyType::Real) {
        if handles.contains_key(&spec.adapter) {
            continue;
        }
        let handle = connect_binding(config, &spec.adapter, human_texts)?;
        handles.insert(spec.adapter.clone(), handle);
    }
    Ok(handles)
}
