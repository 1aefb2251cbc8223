mod common;

use std::time::Duration;

use common::{analyze, golden_mismatches};
use dfdtrace_core::analysis::{analyze_directory, AnalysisOptions};
use dfdtrace_core::model::Stereotype;

#[test]
fn extracts_exactly_the_expected_diagram() {
    let a = analyze("golden");
    assert_eq!(golden_mismatches(&a), Vec::<String>::new());
    assert!(a.elapsed < Duration::from_secs(2), "took {:?}", a.elapsed);
}

#[test]
fn snippet_items() {
    let d = analyze("golden").dfd;
    assert!(d.flow("config", "notification_service").is_some());
    assert!(d.flow("notification_service", "account_service").unwrap().has(Stereotype::FeignConnection));
    let auth = d.node("auth_service").unwrap();
    assert!(auth.has(Stereotype::AuthorizationServer) && auth.has(Stereotype::Encryption));
    let mail = d.node("mail_server").unwrap();
    assert!(mail.has(Stereotype::PlaintextCredentials));
    assert_eq!(mail.tagged_values.single("username"), Some("dev-piggymetrics@gmail.com"));
    assert_eq!(mail.tagged_values.single("password"), Some("s3cr3t"));
    assert!(d.node("account_service").unwrap().has(Stereotype::SslEnabled));
}

#[test]
fn trace_points_at_the_bootstrap_name() {
    let d = analyze("golden").dfd;
    let r = d.trace().get("notification_service").unwrap();
    let p = r.primary().unwrap();
    assert_eq!(p.file, "notification-service/src/main/resources/bootstrap.yml");
    assert_eq!(p.evidence, "notification-service");
    let port = r.sub_items["Port"].first().unwrap();
    assert_eq!(port.file, "config/src/main/resources/shared/notification-service.yml");
    assert_eq!(port.evidence, "8000");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = analyze("golden");
    let b = analyze("golden");
    assert_eq!(a.json(), b.json());
    assert_eq!(a.trace_json(), b.trace_json());
    assert_eq!(a.dot(), b.dot());
}

#[test]
fn parity_mode_agrees_on_the_fixture() {
    let a = analyze("golden");
    let p = analyze_directory(&common::fixture("golden"), &AnalysisOptions::default().with_paper_parity(true)).unwrap();
    assert_eq!(a.json(), p.json());
}
