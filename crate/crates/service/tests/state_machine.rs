mod common;

use std::collections::HashMap;
use std::sync::OnceLock;
use std::time::Duration;

use proptest::prelude::*;
use warp_core::diagnostics::capture_command;
use warp_core::pipeline::Repair;
use warp_core::{RawCapture, RepairOutcome};
use warp_service::{EventKind, Service, Session, Status};

use common::*;

fn recorded_repair() -> &'static Repair {
    static REPAIR: OnceLock<Repair> = OnceLock::new();
    REPAIR.get_or_init(|| {
        let project = Project::new(SEMICOLON);
        let capture = capture_command(BUILD, &project.path(), Duration::from_secs(30)).unwrap();
        match fixture_pipeline().repair(&capture, &|_| {}) {
            RepairOutcome::Repaired(r) => *r,
            other => panic!("{other:?}"),
        }
    })
}

#[derive(Debug, Clone)]
enum Step {
    BeginBuild,
    FinishClean,
    BeginAnalysis,
    Offer,
    GiveUp,
    Apply(usize),
    Reject(usize),
    Recover,
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        Just(Step::BeginBuild),
        Just(Step::FinishClean),
        Just(Step::BeginAnalysis),
        Just(Step::Offer),
        Just(Step::GiveUp),
        (0usize..3).prop_map(Step::Apply),
        (0usize..3).prop_map(Step::Reject),
        Just(Step::Recover),
    ]
}

fn solution_id(s: &Session, i: usize) -> String {
    s.solutions.get(i).map_or_else(|| format!("missing-{i}"), |x| x.id.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Every accepted step is an edge of the declared graph, every refused
    /// step leaves the session untouched, and history only grows.
    #[test]
    fn session_never_leaves_the_graph(steps in prop::collection::vec(step(), 1..40)) {
        let mut s = Session::new("s1", BUILD, "/w", 0);
        for (t, st) in steps.iter().enumerate() {
            let before = s.clone();
            let now = t as u64 + 1;
            let ok = match st {
                Step::BeginBuild => s.begin_build(now).is_ok(),
                Step::FinishClean => s.finish_clean(now, "ok").is_ok(),
                Step::BeginAnalysis => s.begin_analysis(now, "err").is_ok(),
                Step::Offer => s.offer(recorded_repair().clone(), now).is_ok(),
                Step::GiveUp => s.give_up(now, "none").is_ok(),
                Step::Apply(i) => { let id = solution_id(&s, *i); s.mark_applied(&id, now).is_ok() }
                Step::Reject(i) => { let id = solution_id(&s, *i); s.mark_rejected(&id, now).is_ok() }
                Step::Recover => s.recover(now),
            };
            if ok {
                prop_assert!(before.status.can_become(s.status), "{:?} -> {:?} via {st:?}", before.status, s.status);
                prop_assert_eq!(&s.history[..before.history.len()], &before.history[..]);
                prop_assert_eq!(s.history.len(), before.history.len() + 1);
            } else {
                prop_assert_eq!(&s, &before, "refused {:?} changed the session", st);
            }
            prop_assert!(s.is_consistent(), "{:?} with {} solutions", s.status, s.solutions.len());
            if s.status == Status::Applied {
                prop_assert!(s.applied.as_ref().is_some_and(|a| s.solution(a).is_some()));
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Build,
    FeedError,
    FeedClean,
    Apply(usize),
    Reject(usize),
    Restore,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::Build),
        Just(Op::FeedError),
        Just(Op::FeedClean),
        (0usize..2).prop_map(Op::Apply),
        (0usize..2).prop_map(Op::Reject),
        Just(Op::Restore),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The same property through the service: consecutive status events of
    /// a session are graph edges, whatever the callers do.
    #[test]
    fn service_events_follow_the_graph(ops in prop::collection::vec(op(), 1..16)) {
        let project = Project::new(SEMICOLON);
        let broken = std::fs::read_to_string(project.source()).unwrap();
        let svc = Service::in_memory(fixture_pipeline());
        let mut rx = svc.subscribe();
        let id = svc.create_session(BUILD, &project.path()).unwrap().id;
        let error = capture_command(BUILD, &project.path(), Duration::from_secs(30)).unwrap();
        let mut clean = RawCapture::recorded(BUILD, 0, "", "");
        clean.working_dir = project.path();

        for o in &ops {
            let current = svc.get(&id).unwrap();
            match o {
                Op::Build => { let _ = svc.build(&id); }
                Op::FeedError => {
                    let _ = svc.begin_build(&id);
                    let _ = svc.run_pipeline(&id, &error);
                }
                Op::FeedClean => {
                    let _ = svc.begin_build(&id);
                    let _ = svc.run_pipeline(&id, &clean);
                }
                Op::Apply(i) => { let _ = svc.apply(&solution_id(&current, *i)); }
                Op::Reject(i) => { let _ = svc.reject(&solution_id(&current, *i)); }
                Op::Restore => std::fs::write(project.source(), &broken).unwrap(),
            }
            let s = svc.get(&id).unwrap();
            prop_assert!(s.is_consistent());
            prop_assert!(!matches!(s.status, Status::Building | Status::Analyzing), "wedged in {:?}", s.status);
        }

        let mut last: HashMap<String, Status> = HashMap::new();
        while let Ok(ev) = rx.try_recv() {
            if ev.kind != EventKind::Status {
                continue;
            }
            if let Some(prev) = last.insert(ev.session_id.clone(), ev.status) {
                prop_assert!(prev.can_become(ev.status), "{prev:?} -> {:?}", ev.status);
            } else {
                prop_assert_eq!(ev.status, Status::Idle);
            }
        }
        prop_assert_eq!(last.get(&id).copied(), Some(svc.get(&id).unwrap().status));
    }
}
