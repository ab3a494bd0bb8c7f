//! Offline commands: batch scoring, log export, log replay.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use segames_core::config::Config;
use segames_core::content::{prior_text, Content};
use segames_core::evaluator::{Evaluator, Scorer};
use segames_core::event_log::{export_csv, EventLog};
use segames_core::game::Game;
use segames_core::replay::replay_room;
use segames_core::types::RoomId;

/// One input row of `segames score`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScoreRequest {
    pub se: String,
    pub text_id: String,
    pub sentence_index: usize,
}

/// One output row of `segames score`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub text_id: String,
    pub sentence_index: usize,
    pub score: u8,
    pub too_short: bool,
    pub too_similar: bool,
    pub irrelevant: bool,
    pub content_len: usize,
    pub sim_target: f64,
    pub sim_prior: f64,
    pub novel_count: usize,
    pub se: String,
}

/// Reads CSV rows with header `se,text_id,sentence_index` and writes one
/// scored row per input, in input order. Returns the number of rows scored.
pub fn score_csv<R: Read, W: Write>(input: R, output: W, content: &Content, evaluator: &Evaluator) -> Result<usize> {
    let mut reader = csv::Reader::from_reader(input);
    let mut writer = csv::Writer::from_writer(output);
    let mut n = 0;
    for (i, row) in reader.deserialize::<ScoreRequest>().enumerate() {
        let line = i + 2;
        let req = row.with_context(|| format!("input row at line {line}"))?;
        let text = content
            .text(&req.text_id)
            .with_context(|| format!("line {line}: unknown text id {:?}", req.text_id))?;
        let target = text
            .sentence(req.sentence_index)
            .with_context(|| format!("line {line}: sentence index"))?;
        let prior = prior_text(text, req.sentence_index)?;
        let eval = evaluator
            .score(&req.se, target, &prior)
            .with_context(|| format!("line {line}: scoring"))?;
        writer.serialize(ScoreRow {
            text_id: req.text_id,
            sentence_index: req.sentence_index,
            score: eval.score,
            too_short: eval.flags.too_short,
            too_similar: eval.flags.too_similar,
            irrelevant: eval.flags.irrelevant,
            content_len: eval.features.content_len,
            sim_target: eval.features.sim_target,
            sim_prior: eval.features.sim_prior,
            novel_count: eval.features.novel_count,
            se: req.se,
        })?;
        n += 1;
    }
    writer.flush()?;
    Ok(n)
}

/// Writes every logged record of `room` as CSV.
pub fn export_room<W: Write>(log: &EventLog, room: &RoomId, out: W) -> Result<usize> {
    let records = log.query(room);
    if records.is_empty() {
        bail!("no records for room {room}");
    }
    export_csv(&records, out)?;
    Ok(records.len())
}

/// Rebuilds the state of `room` from the log alone.
pub fn replay_from_log(
    config: &Config,
    content: std::sync::Arc<Content>,
    log: &EventLog,
    room: &RoomId,
) -> Result<Game> {
    let records = log.query(room);
    if records.is_empty() {
        bail!("no records for room {room}");
    }
    Ok(replay_room(config, content, &records)?)
}
