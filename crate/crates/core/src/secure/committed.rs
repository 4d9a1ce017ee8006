use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::commit::{commit, decode_f64s, encode_f64s, to_hex, verify, Commitment, Opening};
use super::conversion::{verify_conversion, FIELD_DOMAIN};
use super::field::{Fp, F61, FIXED_BITS, MERSENNE_61};
use super::shares::{share, MacKey, SharedValue};
use super::transcript::{float_payload, Record, Transcript};
use crate::auction::{AuctionInstance, AuctionOutcome, DemandReport, IssuanceBounds, SlotDemand, Valuation, ValuationModel};
use crate::consensus::{
    manager_step, run_protocol_hooked, sample_active_sets, ActiveSets, ConsensusSettings, ManagerState,
    NetworkModel, ProtocolRun, RoundHooks, UserNodeState,
};
use crate::error::{Error, Result};

const REPORT_DOMAIN: &str = "report";
const STANDALONE_DOMAIN: &str = "standalone";

/// Everything the parties start from. Only `instance.reports` and the
/// valuations are private; the network, settings, costs and caps are public.
#[derive(Debug, Clone)]
pub struct CommittedInputs {
    pub instance: AuctionInstance,
    pub net: NetworkModel,
    pub settings: ConsensusSettings,
    pub seed: u64,
}

/// Injected misbehaviour for testing the verifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Fault {
    /// Adds `bias` to the node's price from `round` on.
    PriceBias { node: usize, round: usize, bias: f64 },
    /// Switches the node's demand to `demand` in every slot from `round` on
    /// and opens the switched report at release.
    ChangeInput { node: usize, round: usize, demand: f64 },
    /// Corrupts one MAC share in the node's conversion of its allocation.
    CorruptShare { node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Commitment,
    ReExecution,
    Release,
    Conversion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub node: usize,
    pub round: usize,
    pub check: CheckKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationReport {
    pub checks: usize,
    pub findings: Vec<Finding>,
}

impl VerificationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    /// Commitment failures first, then the earliest deviation.
    pub fn first_error(&self) -> Option<Error> {
        if let Some(f) = self.findings.iter().find(|f| f.check == CheckKind::Commitment) {
            return Some(Error::CommitmentMismatch {
                node: f.node,
                what: f.detail.clone(),
            });
        }
        self.findings
            .iter()
            .min_by_key(|f| (f.round, f.node))
            .map(|f| Error::DeviationDetected {
                node: f.node,
                round: f.round,
            })
    }

    fn push(&mut self, node: usize, round: usize, check: CheckKind, detail: impl Into<String>) {
        self.findings.push(Finding {
            node,
            round,
            check,
            detail: detail.into(),
        });
    }
}

#[derive(Debug, Clone)]
pub struct CommittedRun {
    pub outcome: AuctionOutcome,
    pub protocol: ProtocolRun,
    pub transcript: Transcript,
    pub report: VerificationReport,
}

fn encode_report(r: &DemandReport, v: &[Valuation]) -> Vec<u8> {
    let vals: Vec<f64> = r
        .slots
        .iter()
        .zip(v)
        .flat_map(|(s, q)| [s.x_min, s.x, s.x_max, q.a, q.b, q.c])
        .collect();
    encode_f64s(&vals)
}

fn decode_report(user: usize, bytes: &[u8]) -> Option<(DemandReport, Vec<Valuation>)> {
    let vals = decode_f64s(bytes)?;
    if vals.is_empty() || vals.len() % 6 != 0 {
        return None;
    }
    let mut slots = Vec::new();
    let mut vs = Vec::new();
    for c in vals.chunks_exact(6) {
        slots.push(SlotDemand::new(c[0], c[1], c[2]));
        vs.push(Valuation::new(c[3], c[4], c[5]));
    }
    Some((DemandReport { user, slots }, vs))
}

fn opening_payload(o: &Opening) -> String {
    let mut bytes = o.randomness.to_vec();
    bytes.extend_from_slice(&o.value);
    to_hex(&bytes)
}

fn parse_opening(rec: &Record) -> Option<Opening> {
    let bytes = rec.bytes()?;
    if bytes.len() < 32 {
        return None;
    }
    Some(Opening {
        randomness: bytes[..32].try_into().ok()?,
        value: bytes[32..].to_vec(),
    })
}

fn parse_commitment(rec: &Record) -> Option<Commitment> {
    Some(Commitment {
        digest: rec.bytes()?.try_into().ok()?,
    })
}

fn conversion_payload(slot: usize, o: &Opening, sv: &SharedValue<MERSENNE_61>) -> String {
    let mut bytes = (slot as u64).to_le_bytes().to_vec();
    bytes.extend_from_slice(&o.randomness);
    bytes.extend_from_slice(&o.value);
    bytes.extend_from_slice(&sv.delta.to_le_bytes());
    for x in sv.shares.iter().chain(&sv.macs) {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    to_hex(&bytes)
}

fn parse_conversion(rec: &Record, parties: usize) -> Option<(usize, Opening, SharedValue<MERSENNE_61>)> {
    let b = rec.bytes()?;
    if b.len() != 8 + 32 + 8 + 8 + 16 * parties {
        return None;
    }
    let slot = u64::from_le_bytes(b[..8].try_into().ok()?) as usize;
    let opening = Opening {
        randomness: b[8..40].try_into().ok()?,
        value: b[40..48].to_vec(),
    };
    let field = |k: usize| F61::from_le_bytes(&b[k..k + 8]);
    let delta = field(48)?;
    let shares = (0..parties).map(|p| field(56 + 8 * p)).collect::<Option<Vec<_>>>()?;
    let macs = (0..parties)
        .map(|p| field(56 + 8 * (parties + p)))
        .collect::<Option<Vec<_>>>()?;
    Some((slot, opening, SharedValue { delta, shares, macs }))
}

struct Recorder<'a> {
    faults: &'a [Fault],
    transcript: Transcript,
    changed: Vec<Option<f64>>,
}

impl RoundHooks for Recorder<'_> {
    fn tamper(&mut self, round: usize, user: usize, state: &mut UserNodeState) {
        for f in self.faults {
            match *f {
                Fault::PriceBias { node, round: r, bias } if node == user && round >= r => {
                    state.lambda.add_scalar_mut(bias);
                }
                Fault::ChangeInput { node, round: r, demand } if node == user && round >= r => {
                    for v in state.valuations.iter_mut() {
                        *v = v.recentred(demand);
                    }
                    self.changed[user] = Some(demand);
                }
                _ => {}
            }
        }
    }

    fn observe(&mut self, round: usize, active: &ActiveSets, manager: &ManagerState, users: &[UserNodeState]) {
        let m = users.len();
        let lam: Vec<f64> = manager.lambda.iter().copied().collect();
        self.transcript.append(Record::new(round, m, "lambda", float_payload(&lam)));
        for (i, u) in users.iter().enumerate() {
            if active.users[i] {
                let l: Vec<f64> = u.lambda.iter().copied().collect();
                self.transcript.append(Record::new(round, i, "lambda", float_payload(&l)));
            }
        }
    }
}

/// Runs the decentralised auction with input commitments, a full message
/// transcript and a share conversion of every final allocation, then verifies
/// the transcript by re-execution. Findings are reported, not raised.
pub fn execute_committed(inputs: &CommittedInputs, faults: &[Fault]) -> Result<CommittedRun> {
    let inst = &inputs.instance;
    let n = inst.reports.len();
    let slots = inst.valuations.slots();
    let reported = inst.valuations.reported(&inst.reports);
    let mut rng = crate::seed::stream(inputs.seed, "secure");

    let mut recorder = Recorder {
        faults,
        transcript: Transcript::new(n),
        changed: vec![None; n],
    };
    let mut report_openings = Vec::new();
    let mut standalone_openings = Vec::new();
    for (i, (r, v)) in inst.reports.iter().zip(&reported.users).enumerate() {
        let (c, o) = commit(REPORT_DOMAIN, &encode_report(r, v), &mut rng);
        recorder.transcript.append(Record::new(0, i, "commit-report", to_hex(&c.digest)));
        report_openings.push(o);
        let standalone: Vec<f64> = r.slots.iter().zip(v).map(|(s, q)| q.argmax_in(s.x_min, s.x_max)).collect();
        let (c, o) = commit(STANDALONE_DOMAIN, &encode_f64s(&standalone), &mut rng);
        recorder.transcript.append(Record::new(0, i, "commit-standalone", to_hex(&c.digest)));
        standalone_openings.push(o);
    }

    let protocol = run_protocol_hooked(
        &inst.reports,
        &inst.valuations,
        &inst.bounds,
        &inputs.net,
        &inputs.settings,
        &mut recorder,
    )?;
    let mut transcript = recorder.transcript;
    let release = transcript.last_round() + 1;

    for i in 0..n {
        let mut opening = report_openings[i].clone();
        if let Some(demand) = recorder.changed[i] {
            let mut r = inst.reports[i].clone();
            r.slots.iter_mut().for_each(|s| s.x = demand);
            let v: Vec<Valuation> = reported.users[i].iter().map(|q| q.recentred(demand)).collect();
            opening.value = encode_report(&r, &v);
        }
        transcript.append(Record::new(release, i, "open-report", opening_payload(&opening)));
        transcript.append(Record::new(release, i, "open-standalone", opening_payload(&standalone_openings[i])));
        transcript.append(Record::new(release, i, "allocation", float_payload(&protocol.consensus.allocation[i])));
    }
    transcript.append(Record::new(release, n, "issuance", float_payload(&protocol.consensus.issuance)));

    let key = MacKey::<MERSENNE_61>::random(&mut rng);
    for i in 0..n {
        for t in 0..slots {
            let a = F61::encode_fixed(protocol.consensus.allocation[i][t]);
            let (c, o) = commit(FIELD_DOMAIN, &a.to_le_bytes(), &mut rng);
            let mut sv = share(a, n + 1, &key, &mut rng);
            if faults.iter().any(|f| matches!(f, Fault::CorruptShare { node } if *node == i)) {
                sv.macs[0] += F61::ONE;
            }
            transcript.append(Record::new(release, i, "commit-field", to_hex(&c.digest)));
            transcript.append(Record::new(release, i, "conversion", conversion_payload(t, &o, &sv)));
        }
    }
    transcript.append(Record::new(release, n, "open-mac-key", to_hex(&key.alpha.to_le_bytes())));

    let report = verify_transcript(&transcript, &inputs.net, &inputs.settings, &inst.valuations.cost, &inst.bounds);
    Ok(CommittedRun {
        outcome: protocol.outcome.clone(),
        protocol,
        transcript,
        report,
    })
}

/// As [`execute_committed`], failing on the first finding.
pub fn committed_protocol_run(inputs: &CommittedInputs, faults: &[Fault]) -> Result<CommittedRun> {
    let run = execute_committed(inputs, faults)?;
    match run.report.first_error() {
        Some(e) => Err(e),
        None => Ok(run),
    }
}

fn floats_at(t: &Transcript, round: usize, sender: usize, kind: &str) -> Option<DVector<f64>> {
    t.find(round, sender, kind).and_then(|r| r.floats()).map(DVector::from_vec)
}

/// Re-executes every node from its opened inputs and the messages it received,
/// and checks commitments and share conversions. Uses only public parameters
/// and the transcript.
pub fn verify_transcript(
    t: &Transcript,
    net: &NetworkModel,
    settings: &ConsensusSettings,
    cost: &[crate::auction::IssuanceCost],
    bounds: &IssuanceBounds,
) -> VerificationReport {
    let n = t.users;
    let manager = n;
    let mut report = VerificationReport::default();
    let release = t.last_round();
    let rounds = release.saturating_sub(1);

    // openings
    let mut opened: Vec<Option<(DemandReport, Vec<Valuation>)>> = vec![None; n];
    for i in 0..n {
        report.checks += 2;
        let found = (
            t.find(0, i, "commit-report").and_then(parse_commitment),
            t.find(release, i, "open-report").and_then(parse_opening),
        );
        match found {
            (Some(c), Some(o)) if verify(&c, REPORT_DOMAIN, &o) => match decode_report(i, &o.value) {
                Some(r) => opened[i] = Some(r),
                None => report.push(i, release, CheckKind::Commitment, "report opening is malformed"),
            },
            _ => report.push(i, release, CheckKind::Commitment, "report opening does not match commitment"),
        }
        let found = (
            t.find(0, i, "commit-standalone").and_then(parse_commitment),
            t.find(release, i, "open-standalone").and_then(parse_opening),
        );
        match (found, &opened[i]) {
            ((Some(c), Some(o)), Some((r, v))) if verify(&c, STANDALONE_DOMAIN, &o) => {
                let expect: Vec<f64> = r.slots.iter().zip(v).map(|(s, q)| q.argmax_in(s.x_min, s.x_max)).collect();
                if decode_f64s(&o.value).as_deref() != Some(&expect[..]) {
                    report.push(i, release, CheckKind::Release, "standalone optimum does not solve the local problem");
                }
            }
            ((Some(c), Some(o)), _) if verify(&c, STANDALONE_DOMAIN, &o) => {}
            _ => report.push(i, release, CheckKind::Commitment, "standalone opening does not match commitment"),
        }
    }
    if opened.iter().any(Option::is_none) {
        return report;
    }
    let opened: Vec<(DemandReport, Vec<Valuation>)> = opened.into_iter().flatten().collect();
    let reports: Vec<DemandReport> = opened.iter().map(|o| o.0.clone()).collect();
    let vm = ValuationModel {
        users: opened.iter().map(|o| o.1.clone()).collect(),
        cost: cost.to_vec(),
    };
    let actives: Vec<ActiveSets> = (1..=rounds).map(|k| sample_active_sets(net, k as u64)).collect();

    // users, independently
    let user_results: Vec<(usize, Vec<Finding>)> = (0..n)
        .into_par_iter()
        .map(|i| verify_user(t, i, &reports, &vm, settings, &actives, release))
        .collect();
    for (checks, findings) in user_results {
        report.checks += checks;
        report.findings.extend(findings);
    }

    // manager
    match ManagerState::new(n, vm.slots(), settings.q, settings.eps1, settings.eps2) {
        Ok(mut m) => {
            for (idx, active) in actives.iter().enumerate() {
                let k = idx + 1;
                report.checks += 1;
                let Ok(next) = manager_step(&m, cost, &bounds.y_max) else {
                    report.push(manager, k, CheckKind::ReExecution, "manager step fails");
                    break;
                };
                m = next;
                if floats_at(t, k, manager, "lambda").as_ref() != Some(&m.lambda) {
                    report.push(manager, k, CheckKind::ReExecution, "manager price differs from re-execution");
                    break;
                }
                for i in 0..n {
                    if active.has_edge(i, manager) {
                        if let Some(sent) = floats_at(t, k, i, "lambda") {
                            m.absorb(i, &sent);
                        }
                    }
                }
            }
            report.checks += 1;
            if report.findings.iter().all(|f| f.node != manager)
                && floats_at(t, release, manager, "issuance").as_ref() != Some(&m.y)
            {
                report.push(manager, release, CheckKind::Release, "issuance differs from re-execution");
            }
        }
        Err(e) => report.push(manager, 0, CheckKind::ReExecution, e.to_string()),
    }

    // conversions
    let alpha = t
        .find(release, manager, "open-mac-key")
        .and_then(|r| r.bytes())
        .and_then(|b| F61::from_le_bytes(&b));
    for i in 0..n {
        let alloc = floats_at(t, release, i, "allocation");
        let commits: Vec<&Record> = t
            .records
            .iter()
            .filter(|r| r.round == release && r.sender == i && r.kind == "commit-field")
            .collect();
        let convs: Vec<&Record> = t
            .records
            .iter()
            .filter(|r| r.round == release && r.sender == i && r.kind == "conversion")
            .collect();
        report.checks += 1;
        if commits.len() != convs.len() || convs.len() != vm.slots() {
            report.push(i, release, CheckKind::Conversion, "missing share conversions");
            continue;
        }
        for (c, conv) in commits.iter().zip(&convs) {
            report.checks += 1;
            let ok = match (parse_commitment(c), parse_conversion(conv, n + 1), alpha, &alloc) {
                (Some(c), Some((slot, o, sv)), Some(alpha), Some(x)) if slot < x.len() => {
                    let value = Fp::<MERSENNE_61>::from_le_bytes(&o.value).map(|a| a.decode_fixed());
                    let close = value.is_some_and(|v| (v - x[slot]).abs() <= 1.0 / (1u64 << FIXED_BITS) as f64);
                    close && verify_conversion(&c, &o, &sv, alpha)
                }
                _ => false,
            };
            if !ok {
                report.push(i, release, CheckKind::Conversion, "share conversion fails verification");
                break;
            }
        }
    }
    report
}

fn verify_user(
    t: &Transcript,
    i: usize,
    reports: &[DemandReport],
    vm: &ValuationModel,
    settings: &ConsensusSettings,
    actives: &[ActiveSets],
    release: usize,
) -> (usize, Vec<Finding>) {
    let manager = t.users;
    let mut checks = 0;
    let finding = |round: usize, check: CheckKind, detail: &str| Finding {
        node: i,
        round,
        check,
        detail: detail.to_string(),
    };
    let users = match crate::consensus::run::build_users(&reports[i..=i], &ValuationModel {
        users: vec![vm.users[i].clone()],
        cost: vm.cost.clone(),
    }, settings)
    {
        Ok(u) => u,
        Err(e) => return (1, vec![finding(0, CheckKind::ReExecution, &e.to_string())]),
    };
    let mut u = users.into_iter().next().expect("one user built");
    for (idx, active) in actives.iter().enumerate() {
        let k = idx + 1;
        let sent = floats_at(t, k, i, "lambda");
        checks += 1;
        if !active.users[i] {
            if sent.is_some() {
                return (checks, vec![finding(k, CheckKind::ReExecution, "message from an offline node")]);
            }
            continue;
        }
        match crate::consensus::user_step(&u, true) {
            Ok(next) => u = next,
            Err(e) => return (checks, vec![finding(k, CheckKind::ReExecution, &e.to_string())]),
        }
        match sent {
            Some(s) if s == u.lambda => {}
            Some(_) => return (checks, vec![finding(k, CheckKind::ReExecution, "price differs from re-execution")]),
            None => return (checks, vec![finding(k, CheckKind::ReExecution, "missing update from an online node")]),
        }
        if active.has_edge(i, manager) {
            match floats_at(t, k, manager, "lambda") {
                Some(ml) => {
                    let s = u.lambda.clone();
                    u.absorb(&ml, &s);
                }
                None => return (checks, vec![finding(k, CheckKind::ReExecution, "missing manager price")]),
            }
        }
    }
    checks += 1;
    if floats_at(t, release, i, "allocation").as_ref() != Some(&u.x) {
        return (checks, vec![finding(release, CheckKind::Release, "allocation differs from re-execution")]);
    }
    (checks, Vec::new())
}
