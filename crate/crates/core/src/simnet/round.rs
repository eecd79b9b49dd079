//! One round as a discrete-event run.
//!
//! A vertex job walks through `2n` steps for its `n` scheduled members:
//! shuffles first, then re-encryptions. Before a step starts its prover
//! needs the previous output and, in the NIZK variant, a verification
//! report from every other member. Proofs are checked once per step; each
//! verifier is still charged the verification cost.

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use sha3::{Digest, Sha3_256};

use super::engine::{micros, Links, Micros, Queue, Servers};
use super::{Behavior, RoundMetrics, RoundResult, SimError, Simulation};
use crate::codec::Wire;
use crate::crypto::{cca2_enc, commit, embed, enc, unembed, Ciphertext};
use crate::group::PrimeGroup;
use crate::grouping::{GroupId, ServerId};
use crate::protocol::{
    blame, build_exit_report, check_reenc, check_shuffle, decode_plain, do_reenc, do_shuffle, encode_plain,
    exit_process_trap, frame_inner, frame_len, release_outputs, row_width, submission_binding, trustee_decide,
    verify_submission, Abort, AbortRecord, BlameInput, Event, ExitReport, Manifest, Outcome, Row, Stage, Step,
    Submission, Tamper, TrapMessage, TrusteeVerdict, UserId, Variant,
};
use crate::rng;
use crate::topology::VertexId;
use crate::zk::{enc_row_proof, verify_enc_row_proof};

enum Ev {
    /// A predecessor batch (or the entry batch) reaches a member.
    Piece {
        job: usize,
        slot: usize,
    },
    /// A step's output reaches a member that must verify it.
    Proposal {
        job: usize,
        step: usize,
    },
    /// A member's go-ahead for `step` reaches its prover.
    Report {
        job: usize,
        step: usize,
        from: ServerId,
    },
    Timeout {
        job: usize,
        step: usize,
    },
    Detect {
        abort: Abort,
    },
    Exit {
        gid: GroupId,
    },
    ExitReport {
        report: usize,
    },
    TrusteeTimeout,
    Release {
        gid: GroupId,
    },
}

struct Piece<G: PrimeGroup> {
    rows: Vec<Row<G>>,
    /// Whether the sender's last step verifies, and who sent it.
    valid: bool,
    sender: ServerId,
}

struct Job<G: PrimeGroup> {
    vertex: VertexId,
    gid: GroupId,
    next_pks: Vec<Option<G::Element>>,
    pieces: Vec<Option<Piece<G>>>,
    delivered: BTreeMap<ServerId, usize>,
    step: usize,
    need: BTreeSet<ServerId>,
    rows: Vec<Row<G>>,
    batches: Vec<Vec<Row<G>>>,
    verdicts: Vec<bool>,
    /// Bytes of the proof attached to each step.
    proof_bytes: Vec<u64>,
    elements: usize,
    withheld: BTreeSet<ServerId>,
}

struct ExitInbox {
    traps: Vec<TrapMessage>,
    inners: Vec<Vec<u8>>,
    malformed: usize,
    seen: BTreeSet<usize>,
    arrivals: BTreeMap<ServerId, usize>,
}

struct Run<'a, G: PrimeGroup> {
    sim: &'a Simulation<G>,
    q: Queue<Ev>,
    links: Links,
    servers: Servers,
    stages: Vec<Stage<G>>,
    reporters: Vec<Vec<ServerId>>,
    jobs: Vec<Job<G>>,
    corrupt: BTreeSet<ServerId>,
    transcript: crate::protocol::RoundTranscript,
    touches: Vec<usize>,
    bytes: u64,
    events: u64,
    end: Micros,
    halted: Option<Abort>,
    aborts: Vec<AbortRecord<G>>,
    nizk_outputs: Vec<Vec<u8>>,
    expected_commitments: BTreeMap<GroupId, Vec<crate::crypto::Commitment>>,
    inbox: Vec<ExitInbox>,
    reports: Vec<ExitReport>,
    trustee_inbox: BTreeMap<ServerId, Vec<usize>>,
    manifest: Option<Manifest<G>>,
    verdict: Option<TrusteeVerdict>,
    releases: BTreeMap<GroupId, usize>,
    ct_bytes: u64,
}

fn digest_rows<G: PrimeGroup>(rows: impl IntoIterator<Item = impl AsRef<[Ciphertext<G>]>>) -> String {
    let mut h = Sha3_256::new();
    for row in rows {
        for ct in row.as_ref() {
            h.update(ct.to_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Even split; when a tampered batch has the wrong length, earlier pieces
/// take the extra rows so the round can still reach the checks that catch it.
fn split<T: Clone>(rows: &[T], beta: usize) -> Vec<Vec<T>> {
    let (base, extra) = (rows.len() / beta, rows.len() % beta);
    let mut out = Vec::with_capacity(beta);
    let mut at = 0;
    for b in 0..beta {
        let len = base + usize::from(b < extra);
        out.push(rows[at..at + len].to_vec());
        at += len;
    }
    out
}

pub(super) fn execute<G: PrimeGroup>(
    sim: &Simulation<G>,
    submissions: Vec<Submission<G>>,
) -> Result<RoundResult<G>, SimError> {
    let cfg = &sim.config;
    let topo = &sim.topology;
    let w = topo.width;
    let mut run = Run {
        sim,
        q: Queue::default(),
        links: Links::new(&cfg.net, cfg.seed),
        servers: Servers::default(),
        stages: Vec::new(),
        reporters: Vec::new(),
        jobs: Vec::new(),
        corrupt: cfg.adversary.iter().filter(|e| e.behavior != Behavior::Crash).map(|e| e.server).collect(),
        transcript: crate::protocol::RoundTranscript::new(),
        touches: vec![0; cfg.groups],
        bytes: 0,
        events: 0,
        end: 0,
        halted: None,
        aborts: Vec::new(),
        nizk_outputs: Vec::new(),
        expected_commitments: BTreeMap::new(),
        inbox: (0..cfg.groups)
            .map(|_| ExitInbox {
                traps: Vec::new(),
                inners: Vec::new(),
                malformed: 0,
                seen: BTreeSet::new(),
                arrivals: BTreeMap::new(),
            })
            .collect(),
        reports: Vec::new(),
        trustee_inbox: BTreeMap::new(),
        manifest: None,
        verdict: None,
        releases: BTreeMap::new(),
        ct_bytes: (3 * G::ELEMENT_LEN + 1) as u64,
    };
    run.transcript.push(Event::Start {
        round: cfg.round,
        variant: cfg.variant,
        groups: cfg.groups,
        messages: cfg.messages,
        iterations: cfg.iterations,
    });

    let mut recovered = 0;
    for gid in 0..cfg.groups as GroupId {
        match sim.keys.schedule(gid, &sim.alive) {
            Ok((stage, restored)) => {
                if restored > 0 {
                    recovered += restored;
                    run.transcript.push(Event::Recovered { gid, positions: restored });
                    run.charge_recovery(gid, &stage);
                }
                let desc = &sim.keys.groups[gid as usize];
                let mut reps: Vec<ServerId> = desc.members.iter().copied().filter(|m| sim.alive.contains(m)).collect();
                reps.extend(stage.members.iter().map(|m| m.server).filter(|s| !desc.members.contains(s)));
                run.reporters.push(reps);
                run.stages.push(stage);
            }
            Err(e) => {
                let outcome = Outcome::Unrecoverable { gid: e.gid };
                run.transcript.push(Event::Outcome { outcome: outcome.clone() });
                return Ok(run.finish(outcome, Vec::new(), recovered, 0, 0));
            }
        }
    }

    // entry: every member checks every submission; rejected or missing slots
    // are padded with listed dummies
    let mut accepted: BTreeMap<UserId, Submission<G>> = BTreeMap::new();
    let mut rejected = 0;
    for sub in submissions {
        let ok = (sub.user as usize) < cfg.messages
            && !accepted.contains_key(&sub.user)
            && sub.gid == sim.entry_group(sub.user)
            && verify_submission(&sim.ctx, sub.gid, &sim.keys.pk(sub.gid)?, &sub).is_ok();
        run.transcript.push(Event::Submission { user: sub.user, gid: sub.gid, accepted: ok });
        if ok {
            if let Some(c) = sub.commitment {
                run.expected_commitments.entry(sub.gid).or_default().push(c);
            }
            accepted.insert(sub.user, sub);
        } else {
            rejected += 1;
        }
    }
    let mut dummy_rng = rng::stream(cfg.seed, cfg.round, "harness/dummies");
    let mut dummy_digests = Vec::new();
    let mut entry_rows: Vec<Vec<Row<G>>> = vec![Vec::new(); w];
    for sub in accepted.values() {
        let v = sim.entry[sub.user as usize];
        entry_rows[v].extend(sub.sealed.iter().map(|s| s.row.clone()));
    }
    for (v, rows) in entry_rows.iter_mut().enumerate() {
        let gid = topo.group_of(VertexId { layer: 0, index: v });
        let pk = sim.keys.pk(gid)?;
        while rows.len() < w {
            let (row, digest) = run.dummy_row(gid, &pk, &mut dummy_rng)?;
            rows.push(row);
            dummy_digests.push(digest);
        }
    }
    let dummies = dummy_digests.len();
    let trustee_secrets: Vec<(ServerId, G::Scalar)> = sim.trustees.iter().map(|(id, kp)| (*id, kp.secret)).collect();
    run.manifest = Some(Manifest::sign(cfg.round, dummy_digests, &trustee_secrets, &mut dummy_rng));

    for t in 0..cfg.iterations {
        for v in topo.layer(t) {
            let gid = topo.group_of(v);
            let next_pks = if t + 1 < cfg.iterations {
                topo.layer(t + 1).into_iter().map(|n| Some(run.stages[topo.group_of(n) as usize].pk)).collect()
            } else {
                vec![None; w]
            };
            let slots = if t == 0 { 1 } else { w };
            run.jobs.push(Job {
                vertex: v,
                gid,
                next_pks,
                pieces: (0..slots).map(|_| None).collect(),
                delivered: BTreeMap::new(),
                step: 0,
                need: BTreeSet::new(),
                rows: Vec::new(),
                batches: Vec::new(),
                verdicts: Vec::new(),
                proof_bytes: Vec::new(),
                elements: 0,
                withheld: BTreeSet::new(),
            });
        }
    }
    for (v, rows) in entry_rows.into_iter().enumerate() {
        let gid = run.jobs[v].gid;
        let members: Vec<ServerId> = run.stages[gid as usize].members.iter().map(|m| m.server).collect();
        run.jobs[v].need = members.iter().copied().collect();
        run.jobs[v].pieces[0] = Some(Piece { rows, valid: true, sender: members[0] });
        for m in members {
            run.q.push(0, m, Ev::Piece { job: v, slot: 0 });
        }
    }

    while let Some((at, actor, ev)) = run.q.pop() {
        run.events += 1;
        run.handle(at, actor, ev)?;
    }

    let outcome = if let Some(abort) = run.halted {
        Outcome::Aborted { abort }
    } else {
        match cfg.variant {
            Variant::Nizk => Outcome::Delivered,
            Variant::Trap => match run.verdict.clone() {
                Some(TrusteeVerdict::Release) => Outcome::Released,
                Some(TrusteeVerdict::Destroy(reason)) => Outcome::Destroyed { reason },
                None => return Err(SimError::Config("round stalled before a trustee decision".into())),
            },
        }
    };
    let mut outputs = Vec::new();
    let mut blamed = Vec::new();
    match &outcome {
        Outcome::Delivered => {
            let manifest = run.manifest.as_ref().expect("manifest signed");
            let mut pad: BTreeMap<[u8; 32], usize> = BTreeMap::new();
            for d in &manifest.dummies {
                *pad.entry(*d).or_default() += 1;
            }
            for m in std::mem::take(&mut run.nizk_outputs) {
                match pad.get_mut(&commit(&m).0) {
                    Some(n) if *n > 0 => *n -= 1,
                    _ => outputs.push(m),
                }
            }
        }
        Outcome::Released => {
            let secret = sim.trustees.iter().fold(G::scalar_zero(), |acc, (_, kp)| acc + kp.secret);
            let inners: Vec<Vec<u8>> = run.inbox.iter().flat_map(|i| i.inners.iter().cloned()).collect();
            outputs = release_outputs(&secret, &inners, run.manifest.as_ref().expect("manifest signed"))?;
        }
        Outcome::Destroyed { .. } => {
            let secrets: BTreeMap<GroupId, G::Scalar> = (0..cfg.groups as GroupId)
                .map(|g| Ok((g, sim.keys.group_secret(g)?)))
                .collect::<Result<_, SimError>>()?;
            let subs: Vec<Submission<G>> = accepted.into_values().collect();
            blamed = blame(&BlameInput { submissions: &subs, group_secrets: &secrets });
            run.transcript.push(Event::Blamed { users: blamed.clone() });
        }
        _ => {}
    }
    if !matches!(outcome, Outcome::Released | Outcome::Destroyed { .. }) {
        run.transcript.push(Event::Outcome { outcome: outcome.clone() });
    }
    let mut result = run.finish(outcome, outputs, recovered, rejected, dummies);
    result.blamed = blamed;
    Ok(result)
}

impl<G: PrimeGroup> Run<'_, G> {
    fn costs(&self) -> &super::CostModel {
        &self.sim.config.net.costs
    }

    fn nizk(&self) -> bool {
        self.sim.config.variant == Variant::Nizk
    }

    fn timeout(&self) -> Micros {
        micros(self.sim.config.net.report_timeout_ms / 1e3)
    }

    fn send(&mut self, from: ServerId, to: ServerId, at: Micros, bytes: u64, ev: Ev) {
        self.bytes += bytes;
        let lat = self.links.latency(from, to);
        self.q.push(at + lat, to, ev);
    }

    fn rows_bytes(&self, rows: usize, width: usize) -> u64 {
        (rows * width) as u64 * self.ct_bytes
    }

    fn members(&self, gid: GroupId) -> Vec<ServerId> {
        self.stages[gid as usize].members.iter().map(|m| m.server).collect()
    }

    fn prover(&self, job: usize, step: usize) -> ServerId {
        let st = &self.stages[self.jobs[job].gid as usize];
        st.members[step % st.members.len()].server
    }

    fn steps(&self, job: usize) -> usize {
        2 * self.stages[self.jobs[job].gid as usize].members.len()
    }

    fn behaves(&self, server: ServerId, b: Behavior, v: VertexId) -> bool {
        self.sim.config.adversary.iter().any(|e| e.server == server && e.behavior == b && e.fires(v))
    }

    fn withholds(&self, server: ServerId) -> bool {
        self.sim.config.adversary.iter().any(|e| e.server == server && e.behavior == Behavior::WithholdReport)
    }

    /// A stand-in waits for sub-shares from the buddy members before it can
    /// start.
    fn charge_recovery(&mut self, gid: GroupId, stage: &Stage<G>) {
        let desc = &self.sim.keys.groups[gid as usize];
        for m in stage.members.iter().filter(|m| !desc.members.contains(&m.server)) {
            let mut ready = 0;
            for b in &desc.buddies {
                for &s in &self.sim.keys.groups[*b as usize].members {
                    if self.sim.alive.contains(&s) {
                        ready = ready.max(self.links.latency(s, m.server));
                    }
                }
            }
            self.servers.hold_until(m.server, ready);
        }
    }

    fn payload(&self, m: &[u8], rng: &mut impl RngCore) -> Vec<u8> {
        let plain = encode_plain(m, self.sim.config.msg_len).expect("within limit");
        match self.sim.config.variant {
            Variant::Nizk => plain,
            Variant::Trap => frame_inner(
                &cca2_enc::<G, _>(&self.sim.trustee_pk, &plain, rng),
                frame_len::<G>(self.sim.config.msg_len),
            ),
        }
    }

    fn dummy_row(
        &mut self,
        gid: GroupId,
        pk: &G::Element,
        rng: &mut impl RngCore,
    ) -> Result<(Row<G>, [u8; 32]), SimError> {
        let mut m = vec![0u8; self.sim.config.msg_len];
        rng.fill_bytes(&mut m);
        let elems = embed::<G>(&self.payload(&m, rng)).map_err(crate::protocol::ProtocolError::from)?;
        let binding = submission_binding(self.sim.config.round, gid);
        let (row, proofs) = enc_row_proof(pk, &elems, &binding, rng);
        debug_assert!(verify_enc_row_proof(pk, &row, &proofs, &binding));
        Ok((row, commit(&m).0))
    }

    /// A row the adversary can make on its own: a fresh, well-formed message
    /// under the current group key.
    fn forged_row(&self, pk: &G::Element, rng: &mut impl RngCore) -> Row<G> {
        let mut m = vec![0u8; self.sim.config.msg_len];
        rng.fill_bytes(&mut m);
        let elems = embed::<G>(&self.payload(&m, rng)).expect("payload embeds");
        elems.iter().map(|e| enc::<G, _>(pk, e, rng)).collect()
    }

    fn tamper(&self, job: usize, server: ServerId, step: Step, rng: &mut impl RngCore) -> Option<Tamper<G>> {
        let v = self.jobs[job].vertex;
        let pk = self.stages[self.jobs[job].gid as usize].pk;
        let has = |b| self.behaves(server, b, v);
        match step {
            Step::Shuffle if has(Behavior::DropCt) => Some(Tamper::Drop {
                // unproven mixing lets the dropper refill the slot unnoticed
                backfill: (!self.nizk()).then(|| self.forged_row(&pk, rng)),
            }),
            Step::Shuffle if has(Behavior::ReplaceCt) => Some(Tamper::Replace(self.forged_row(&pk, rng))),
            Step::Shuffle if has(Behavior::DuplicateCt) => Some(Tamper::Duplicate),
            Step::Shuffle if has(Behavior::BadShuffle) => Some(Tamper::BadShuffle),
            Step::Reenc if has(Behavior::BadReenc) => Some(Tamper::BadReenc),
            _ => None,
        }
    }

    fn handle(&mut self, at: Micros, actor: ServerId, ev: Ev) -> Result<(), SimError> {
        match ev {
            Ev::Piece { job, slot } => self.on_piece(at, actor, job, slot),
            Ev::Proposal { job, step } => {
                self.on_proposal(at, actor, job, step);
                Ok(())
            }
            Ev::Report { job, step, from } => {
                if self.jobs[job].step == step && self.jobs[job].need.remove(&from) && self.jobs[job].need.is_empty() {
                    self.run_step(at, job)?;
                }
                Ok(())
            }
            Ev::Timeout { job, step } => {
                let j = &self.jobs[job];
                if j.step == step && !j.need.is_empty() {
                    if let Some(&accused) = j.need.intersection(&j.withheld).next() {
                        let gid = j.gid;
                        self.detect(at, actor, Abort { gid, accused, step: Step::Report });
                    } else {
                        let t = self.timeout();
                        self.q.push(at + t, actor, Ev::Timeout { job, step });
                    }
                }
                Ok(())
            }
            Ev::Detect { abort } => {
                if self.halted.is_none() {
                    let sk = self.sim.keys.servers[&actor].signing.secret;
                    let mut r = rng::stream(self.sim.config.seed, self.sim.config.round, &format!("abort/{actor}"));
                    self.aborts.push(AbortRecord::sign(self.sim.config.round, abort, actor, &sk, &mut r));
                    self.transcript.push(Event::Abort { abort, reporter: actor });
                    self.halted = Some(abort);
                    self.end = at;
                    self.q.clear();
                }
                Ok(())
            }
            Ev::Exit { gid, .. } => {
                self.on_exit(at, actor, gid);
                Ok(())
            }
            Ev::ExitReport { report } => {
                self.trustee_inbox.entry(actor).or_default().push(report);
                let have = self.trustee_inbox[&actor].len();
                if have == 1 {
                    let t = self.timeout();
                    self.q.push(at + t, actor, Ev::TrusteeTimeout);
                }
                if have == self.expected_reporters().len() {
                    self.decide(at, actor);
                }
                Ok(())
            }
            Ev::TrusteeTimeout => {
                let expected = self.expected_reporters();
                let have = self.trustee_inbox.get(&actor).map_or(0, Vec::len);
                if self.verdict.is_none() && have < expected.len() {
                    let silent = expected.iter().any(|(_, s)| self.withholds(*s));
                    if silent {
                        self.decide(at, actor);
                    } else {
                        let t = self.timeout();
                        self.q.push(at + t, actor, Ev::TrusteeTimeout);
                    }
                }
                Ok(())
            }
            Ev::Release { gid } => {
                let n = self.releases.entry(gid).or_default();
                *n += 1;
                if *n == self.sim.config.trustees {
                    let cost = micros(self.costs().inner_dec * self.inbox[gid as usize].inners.len() as f64);
                    let done = self.servers.work(actor, at, cost);
                    self.end = self.end.max(done);
                }
                Ok(())
            }
        }
    }

    fn detect(&mut self, at: Micros, reporter: ServerId, abort: Abort) {
        self.q.push(at, reporter, Ev::Detect { abort });
    }

    fn on_piece(&mut self, at: Micros, m: ServerId, job: usize, slot: usize) -> Result<(), SimError> {
        let nizk = self.nizk();
        let width = row_width::<G>(&self.sim.ctx);
        let layer = self.jobs[job].vertex.layer;
        let (rows, valid, sender) = {
            let p = self.jobs[job].pieces[slot].as_ref().expect("piece stored before delivery");
            (p.rows.len(), p.valid, p.sender)
        };
        let elements = (rows * width) as f64;
        let cost = if layer == 0 {
            self.costs().enc_proof_verify * elements
        } else if nizk {
            self.costs().reenc_proof_verify * elements
        } else {
            0.0
        };
        let done = self.servers.work(m, at, micros(cost));
        if !valid && !self.corrupt.contains(&m) {
            let gid = self.jobs[sender_job(self, job, slot)].gid;
            self.detect(done, m, Abort { gid, accused: sender, step: Step::Reenc });
            return Ok(());
        }
        let slots = self.jobs[job].pieces.len();
        let seen = self.jobs[job].delivered.entry(m).or_default();
        *seen += 1;
        if *seen == slots {
            let p0 = self.prover(job, 0);
            if nizk && m != p0 && self.withholds(m) {
                self.jobs[job].withheld.insert(m);
                let t = self.timeout();
                self.q.push(done + t, p0, Ev::Timeout { job, step: 0 });
            } else {
                self.send(m, p0, done, 1, Ev::Report { job, step: 0, from: m });
            }
        }
        Ok(())
    }

    fn on_proposal(&mut self, at: Micros, m: ServerId, job: usize, step: usize) {
        let n = self.steps(job) / 2;
        let elements = self.jobs[job].elements as f64;
        let cost = if step < n {
            self.costs().shuf_proof_verify_1024 * elements / 1024.0
        } else {
            self.costs().reenc_proof_verify * elements
        };
        let done = self.servers.work(m, at, micros(cost));
        if !self.jobs[job].verdicts[step] && !self.corrupt.contains(&m) {
            let kind = if step < n { Step::Shuffle } else { Step::Reenc };
            let accused = self.prover(job, step);
            let gid = self.jobs[job].gid;
            self.detect(done, m, Abort { gid, accused, step: kind });
            return;
        }
        if step + 1 < self.steps(job) {
            let next = self.prover(job, step + 1);
            if self.withholds(m) {
                self.jobs[job].withheld.insert(m);
                let t = self.timeout();
                self.q.push(done + t, next, Ev::Timeout { job, step: step + 1 });
            } else {
                self.send(m, next, done, 1, Ev::Report { job, step: step + 1, from: m });
            }
        }
    }

    fn run_step(&mut self, at: Micros, job: usize) -> Result<(), SimError> {
        let s = self.jobs[job].step;
        let total = self.steps(job);
        let n = total / 2;
        let gid = self.jobs[job].gid;
        let prover = self.prover(job, s);
        let nizk = self.nizk();
        let v = self.jobs[job].vertex;
        let width = row_width::<G>(&self.sim.ctx);
        let mut r = rng::stream(
            self.sim.config.seed,
            self.sim.config.round,
            &format!("vertex/{}/{}/step/{s}", v.layer, v.index),
        );
        let c = self.costs().clone();
        let (done, digest) = if s < n {
            if s == 0 {
                let rows: Vec<Row<G>> =
                    self.jobs[job].pieces.iter_mut().flat_map(|p| p.take().expect("all pieces arrived").rows).collect();
                self.touches[gid as usize] += rows.len();
                self.jobs[job].rows = rows;
            }
            let rows = std::mem::take(&mut self.jobs[job].rows);
            let elements = rows.len() * width;
            let tamper = self.tamper(job, prover, Step::Shuffle, &mut r);
            let out = do_shuffle(&self.stages[gid as usize], rows, nizk, tamper.as_ref(), &mut r)?;
            let mut cost = c.shuffle_1024 * elements as f64 / 1024.0;
            if nizk {
                cost += c.shuf_proof_prove_1024 * elements as f64 / 1024.0;
                self.jobs[job].verdicts.push(check_shuffle(&self.stages[gid as usize].pk, &out));
                self.jobs[job].proof_bytes.push(out.proof.as_ref().map_or(0, |p| p.to_bytes().len() as u64));
            }
            let done = self.servers.work(prover, at, micros(cost));
            let digest = digest_rows::<G>(&out.output);
            let j = &mut self.jobs[job];
            j.elements = out.output.len() * width;
            if s + 1 == n {
                j.batches = split(&out.output, j.next_pks.len());
            } else {
                j.rows = out.output;
            }
            (done, digest)
        } else {
            let i = s - n;
            let batches = std::mem::take(&mut self.jobs[job].batches);
            let elements: usize = batches.iter().map(|b| b.len()).sum::<usize>() * width;
            let tamper = self.tamper(job, prover, Step::Reenc, &mut r);
            let member = self.stages[gid as usize].members[i].clone();
            let next_pks = self.jobs[job].next_pks.clone();
            let out = do_reenc(&member, batches, &next_pks, i + 1 == n, nizk, tamper.as_ref(), &mut r);
            let mut cost = c.reenc * elements as f64;
            if nizk {
                cost += c.reenc_proof_prove * elements as f64;
                self.jobs[job].verdicts.push(check_reenc(&member.proof_pk, &next_pks, &out));
                let per = out
                    .proofs
                    .as_ref()
                    .and_then(|p| p.iter().flatten().flatten().next())
                    .map_or(0, |p| p.to_bytes().len());
                self.jobs[job].proof_bytes.push((per * elements) as u64);
            }
            let done = self.servers.work(prover, at, micros(cost));
            let digest = digest_rows::<G>(out.output.iter().flatten());
            self.jobs[job].elements = elements;
            self.jobs[job].batches = out.output;
            (done, digest)
        };
        self.transcript.push(Event::Step {
            layer: v.layer,
            vertex: v.index,
            server: prover,
            step: if s < n { Step::Shuffle } else { Step::Reenc },
            digest,
        });

        let members = self.members(gid);
        let payload = self.jobs[job].elements as u64 / width as u64;
        let payload = self.rows_bytes(payload as usize, width);
        if nizk {
            let proof = self.jobs[job].proof_bytes[s];
            for &m in members.iter().filter(|&&m| m != prover) {
                self.send(prover, m, done, payload + proof, Ev::Proposal { job, step: s });
            }
        }
        if s + 1 < total {
            let next = self.prover(job, s + 1);
            let j = &mut self.jobs[job];
            j.step = s + 1;
            if nizk {
                j.need = members.iter().copied().filter(|&m| m != prover).collect();
                if j.need.is_empty() {
                    // a one-member group has nobody to wait for
                    j.need.insert(prover);
                    self.send(prover, next, done, 0, Ev::Report { job, step: s + 1, from: prover });
                }
            } else {
                j.need = [prover].into();
                self.send(prover, next, done, payload, Ev::Report { job, step: s + 1, from: prover });
            }
            return Ok(());
        }
        self.forward(done, job, prover)
    }

    /// The last member hands each batch to the next layer, or unpacks the
    /// final layer.
    fn forward(&mut self, done: Micros, job: usize, prover: ServerId) -> Result<(), SimError> {
        let v = self.jobs[job].vertex;
        let w = self.sim.topology.width;
        let width = row_width::<G>(&self.sim.ctx);
        let nizk = self.nizk();
        let valid = !nizk || *self.jobs[job].verdicts.last().expect("final step verdict");
        let batches = std::mem::take(&mut self.jobs[job].batches);
        if v.layer + 1 < self.sim.config.iterations {
            for (b, rows) in batches.into_iter().enumerate() {
                let target = (v.layer + 1) * w + b;
                let tgid = self.jobs[target].gid;
                let members = self.members(tgid);
                let receivers: Vec<ServerId> = if nizk { members.clone() } else { vec![members[0]] };
                let size = self.rows_bytes(rows.len(), width);
                if self.jobs[target].need.is_empty() && self.jobs[target].step == 0 {
                    self.jobs[target].need = receivers.iter().copied().collect();
                    if !nizk {
                        self.jobs[target].need = [members[0]].into();
                    }
                }
                self.jobs[target].pieces[v.index] = Some(Piece { rows, valid, sender: prover });
                for m in receivers {
                    self.send(prover, m, done, size, Ev::Piece { job: target, slot: v.index });
                }
            }
            return Ok(());
        }
        let rows: Vec<Row<G>> = batches.into_iter().flatten().collect();
        self.end = self.end.max(done);
        if nizk {
            for row in rows {
                let elems: Vec<G::Element> = row.iter().map(|ct| ct.c).collect();
                if let Some(m) = unembed::<G>(&elems).ok().and_then(|b| decode_plain(&b)) {
                    self.nizk_outputs.push(m);
                }
            }
            return Ok(());
        }
        let fwd = exit_process_trap(&self.sim.ctx, &rows);
        let own = self.jobs[job].gid;
        for g in 0..self.sim.config.groups as GroupId {
            let traps: Vec<TrapMessage> = fwd.traps.iter().copied().filter(|t| t.gid == g).collect();
            let inners: Vec<Vec<u8>> = fwd.inners.iter().filter(|(d, _)| *d == g).map(|(_, b)| b.clone()).collect();
            let size = (traps.len() * 21 + inners.iter().map(Vec::len).sum::<usize>()) as u64;
            let inbox = &mut self.inbox[g as usize];
            if inbox.seen.insert(v.index) {
                inbox.traps.extend(traps);
                inbox.inners.extend(inners);
                if g == own {
                    inbox.malformed += fwd.malformed;
                }
            }
            for m in self.reporters[g as usize].clone() {
                self.send(prover, m, done, size, Ev::Exit { gid: g });
            }
        }
        Ok(())
    }

    fn on_exit(&mut self, at: Micros, m: ServerId, gid: GroupId) {
        let w = self.sim.topology.width;
        let inbox = &mut self.inbox[gid as usize];
        let n = inbox.arrivals.entry(m).or_default();
        *n += 1;
        if *n < w {
            return;
        }
        let expected = self.expected_commitments.get(&gid).cloned().unwrap_or_default();
        let inbox = &self.inbox[gid as usize];
        let report = build_exit_report(&self.sim.ctx, gid, m, &expected, &inbox.traps, &inbox.inners, inbox.malformed);
        if self.withholds(m) {
            return;
        }
        self.reports.push(report);
        let idx = self.reports.len() - 1;
        let trustees: Vec<ServerId> = self.sim.trustees.iter().map(|(id, _)| *id).collect();
        for t in trustees {
            self.send(m, t, at, 64, Ev::ExitReport { report: idx });
        }
    }

    fn expected_reporters(&self) -> Vec<(GroupId, ServerId)> {
        self.reporters.iter().enumerate().flat_map(|(g, ms)| ms.iter().map(move |m| (g as GroupId, *m))).collect()
    }

    fn decide(&mut self, at: Micros, trustee: ServerId) {
        if self.verdict.is_some() {
            return;
        }
        let reports: Vec<ExitReport> =
            self.trustee_inbox.get(&trustee).into_iter().flatten().map(|&i| self.reports[i].clone()).collect();
        let expected = self.expected_reporters();
        let manifest = self.manifest.as_ref().expect("manifest signed");
        let pks: Vec<(ServerId, G::Element)> = self.sim.trustees.iter().map(|(id, kp)| (*id, kp.public)).collect();
        let verdict = trustee_decide(&reports, &expected, manifest, &pks);
        self.transcript.push(Event::Manifest { dummies: manifest.len() as u64, expected });
        for report in reports {
            self.transcript.push(Event::Report { report });
        }
        let outcome = match &verdict {
            TrusteeVerdict::Release => Outcome::Released,
            TrusteeVerdict::Destroy(reason) => Outcome::Destroyed { reason: reason.clone() },
        };
        self.transcript.push(Event::Outcome { outcome });
        self.end = self.end.max(at);
        if verdict == TrusteeVerdict::Release {
            let trustees: Vec<ServerId> = self.sim.trustees.iter().map(|(id, _)| *id).collect();
            for g in 0..self.sim.config.groups as GroupId {
                if self.inbox[g as usize].inners.is_empty() {
                    continue;
                }
                let opener = self.reporters[g as usize][0];
                for &t in &trustees {
                    self.send(t, opener, at, G::SCALAR_LEN as u64, Ev::Release { gid: g });
                }
            }
        }
        self.verdict = Some(verdict);
    }

    fn finish(
        mut self,
        outcome: Outcome,
        outputs: Vec<Vec<u8>>,
        recovered: usize,
        rejected: usize,
        dummies: usize,
    ) -> RoundResult<G> {
        let latency = self.end as f64 / 1e6;
        let busy = self.servers.busy_total();
        let active: Vec<f64> = busy.values().map(|&b| b as f64 / 1e6).collect();
        let mean_idle = if active.is_empty() {
            0.0
        } else {
            active.iter().map(|b| (latency - b).max(0.0)).sum::<f64>() / active.len() as f64
        };
        let label = match &outcome {
            Outcome::Delivered => "delivered",
            Outcome::Released => "released",
            Outcome::Destroyed { .. } => "destroyed",
            Outcome::Aborted { .. } => "aborted",
            Outcome::Unrecoverable { .. } => "unrecoverable",
        };
        let metrics = RoundMetrics {
            outcome: label.to_string(),
            latency_s: latency,
            rows: self.sim.topology.capacity(),
            row_width: row_width::<G>(&self.sim.ctx),
            touches: std::mem::take(&mut self.touches),
            bytes: self.bytes,
            mean_idle_s: mean_idle,
            max_busy_s: active.iter().copied().fold(0.0, f64::max),
            recovered_positions: recovered,
            rejected,
            dummies,
            events: self.events,
        };
        RoundResult { outcome, transcript: self.transcript, metrics, outputs, blamed: Vec::new(), aborts: self.aborts }
    }
}

/// The vertex that sent `slot` to `job`.
fn sender_job<G: PrimeGroup>(run: &Run<'_, G>, job: usize, slot: usize) -> usize {
    let v = run.jobs[job].vertex;
    (v.layer - 1) * run.sim.topology.width + slot
}
