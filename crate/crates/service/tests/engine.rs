mod common;

use std::sync::Arc;

use warp_core::synthesis::Provenance;
use warp_service::{Service, ServiceError, SessionError, Status};

use common::*;

#[test]
fn clean_build_returns_to_idle() {
    let project = Project::new(SEMICOLON);
    std::fs::write(project.source(), project.fixed()).unwrap();
    let svc = service();
    let id = svc.create_session(BUILD, &project.path()).unwrap().id;
    let s = svc.build(&id).unwrap();
    assert_eq!(s.status, Status::Idle);
    assert!(s.solutions.is_empty() && s.error_context.is_none());
    assert_eq!(s.builds, 1);
    assert!(s.is_consistent());
}

#[test]
fn missing_program_is_a_build_failure_and_does_not_wedge() {
    let project = Project::new(SEMICOLON);
    let svc = service();
    let id = svc.create_session("warp-no-such-compiler main.c", &project.path()).unwrap().id;
    let r = svc.build(&id);
    assert!(matches!(r, Err(ServiceError::Build(_))), "{r:?}");
    assert_eq!(svc.get(&id).unwrap().status, Status::Idle);
    svc.build(&id).unwrap_err();
}

#[test]
fn apply_patches_the_file_once() {
    let project = Project::new(SEMICOLON);
    let svc = service();
    let id = svc.create_session(BUILD, &project.path()).unwrap().id;
    let s = svc.build(&id).unwrap();
    assert_eq!(s.status, Status::AwaitingDecision);
    let source = s.source.as_ref().unwrap();
    assert_eq!(source.path, project.source());
    let top = s.solutions[0].id.clone();
    assert_eq!(top, format!("{id}-1-1"));

    let report = svc.apply(&top).unwrap();
    assert_eq!(report.session.status, Status::Applied);
    assert_eq!(report.session.applied.as_deref(), Some(top.as_str()));
    assert!(project.compiles());

    let second = svc.apply(&top);
    assert!(
        matches!(second, Err(ServiceError::InvalidState(SessionError::InvalidTransition { from: Status::Applied, .. }))),
        "{second:?}"
    );

    // Rebuilding after the fix verifies it, and the session goes back to Idle.
    let s = svc.build(&id).unwrap();
    assert_eq!(s.status, Status::Idle);
    assert_eq!(s.builds, 2);
}

#[test]
fn external_edit_is_stale() {
    let project = Project::new(SEMICOLON);
    let svc = service();
    let id = svc.create_session(BUILD, &project.path()).unwrap().id;
    let s = svc.build(&id).unwrap();
    std::fs::write(project.source(), "int main(void) { return 0; }\n").unwrap();
    let r = svc.apply(&s.solutions[0].id);
    assert!(matches!(&r, Err(ServiceError::StaleFile { path }) if *path == project.source()), "{r:?}");
    assert_eq!(std::fs::read_to_string(project.source()).unwrap(), "int main(void) { return 0; }\n");
    assert_eq!(svc.get(&id).unwrap().status, Status::AwaitingDecision);

    std::fs::remove_file(project.source()).unwrap();
    assert!(matches!(svc.apply(&s.solutions[0].id), Err(ServiceError::StaleFile { .. })));
}

#[test]
fn failing_sources_still_yield_a_solution() {
    let project = Project::new(SEMICOLON);
    let svc = Service::in_memory(failing_pipeline());
    let id = svc.create_session(BUILD, &project.path()).unwrap().id;
    let s = svc.build(&id).unwrap();
    assert_eq!(s.status, Status::AwaitingDecision);
    assert!(s.evidence.snippets.is_empty());
    assert!(s.solutions.iter().all(|x| x.provenance == Provenance::HypothesisOnly && x.citations.is_empty()));
    svc.apply(&s.solutions[0].id).unwrap();
    assert!(project.compiles());
}

#[test]
fn restart_restores_sessions() {
    let project = Project::new(SEMICOLON);
    let state = tempfile::tempdir().unwrap();
    let store = state.path().join("sessions.jsonl");
    let (id, before) = {
        let svc = Service::open(fixture_pipeline(), &store, 3).unwrap();
        let id = svc.create_session(BUILD, &project.path()).unwrap().id;
        // A second session left mid-build, as if the process died.
        let other = svc.create_session(BUILD, &project.path()).unwrap().id;
        svc.begin_build(&other).unwrap();
        (id.clone(), svc.build(&id).unwrap())
    };
    let svc = Service::open(fixture_pipeline(), &store, 3).unwrap();
    let after = svc.get(&id).unwrap();
    assert_eq!(after, before);
    assert_eq!(after.status, Status::AwaitingDecision);
    let interrupted = svc.list().into_iter().find(|s| s.id != id).unwrap();
    assert_eq!(interrupted.status, Status::Idle);
    assert!(svc.get(&interrupted.id).unwrap().history.last().unwrap().detail.contains("interrupted"));

    // New ids do not collide with restored ones.
    let fresh = svc.create_session("make", &project.path()).unwrap();
    assert_eq!(fresh.id, "s3");
    svc.apply(&before.solutions[0].id).unwrap();
    drop(svc);
    let svc = Service::open(fixture_pipeline(), &store, 3).unwrap();
    assert_eq!(svc.get(&id).unwrap().status, Status::Applied);
    assert_eq!(svc.list().len(), 3);
}

#[test]
fn cache_is_transparent() {
    let project = Project::new(SEMICOLON);
    let plain = Service::in_memory(fixture_pipeline());
    let cached = Arc::new(Service::in_memory(cached_pipeline()));
    let a = plain.create_session(BUILD, &project.path()).unwrap().id;
    let b = cached.create_session(BUILD, &project.path()).unwrap().id;
    let reference = plain.build(&a).unwrap();
    for _ in 0..2 {
        let s = cached.build(&b).unwrap();
        let shape = |v: &[warp_core::FinalSolution]| -> Vec<_> {
            v.iter().map(|x| (x.fix.clone(), x.explanation.clone(), x.confidence, x.citations.clone())).collect()
        };
        assert_eq!(shape(&s.solutions), shape(&reference.solutions));
        assert_eq!(s.evidence, reference.evidence);
        let (mut got, mut want) = (s.error_context.clone().unwrap(), reference.error_context.clone().unwrap());
        got.capture_ref.clear();
        want.capture_ref.clear();
        assert_eq!(got, want);
        let top = s.solutions[0].id.clone();
        cached.reject(&top).unwrap();
    }
}

#[test]
fn builds_of_one_session_are_serialized() {
    let project = Project::new(SEMICOLON);
    let svc = service();
    let id = svc.create_session(BUILD, &project.path()).unwrap().id;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..4).map(|_| s.spawn(|| svc.build(&id))).collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        // The first build parks the session in AwaitingDecision; the rest are refused.
        assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1, "{results:?}");
    });
    let s = svc.get(&id).unwrap();
    assert_eq!(s.status, Status::AwaitingDecision);
    assert!(s.is_consistent());
}
