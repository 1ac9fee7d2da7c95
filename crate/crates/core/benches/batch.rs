//! Throughput of the batch evaluation core: sequential loop vs. the rayon
//! pool at several worker counts, over a stub-judged workload.
//!
//! The stub backend answers in microseconds, so this measures orchestration
//! overhead (prompt assembly, parsing, validation) rather than network time.
//! Run with `cargo bench -p qqeval-core`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use qqeval_core::assets;
use qqeval_core::harness::batch::evaluate_scripts_sequential;
#[cfg(feature = "parallel")]
use qqeval_core::harness::batch::evaluate_scripts_parallel;
use qqeval_core::judge::{BackendKind, Judge, JudgeConfig};
use qqeval_core::prompting::{DialogueScript, ScriptContext, ScriptSource};
use qqeval_core::rubric::{load_rubric, ContextVariables, Rubric};

const WORKLOAD: usize = 300;

fn synthetic_scripts(n: usize) -> Vec<DialogueScript> {
    (0..n)
        .map(|i| DialogueScript {
            script_id: format!("bench-{i:04}"),
            context: ScriptContext {
                main_intent: None,
                user_request: None,
                scene_description: Some(format!(
                    "A courier stops at house number {i} and checks the label twice."
                )),
                headline: None,
            },
            fq: format!("What is written on the label of parcel {i}?"),
            fa: None,
            final_answer: None,
            source: ScriptSource::Fixture,
        })
        .collect()
}

fn stub_judge() -> Judge {
    Judge::new(JudgeConfig::new(BackendKind::Stub), None).expect("stub judge")
}

fn rubric() -> Rubric {
    load_rubric(assets::DEFAULT_RUBRIC_JSON).expect("embedded rubric")
}

fn bench_batch(c: &mut Criterion) {
    let scripts = synthetic_scripts(WORKLOAD);
    let ctx = ContextVariables::new(
        "scene member",
        "resolving uncertainty by acquiring useful information",
    )
    .expect("context");
    let work: Vec<(&DialogueScript, &ContextVariables)> =
        scripts.iter().map(|s| (s, &ctx)).collect();
    let judge = stub_judge();
    let rubric = rubric();

    let mut group = c.benchmark_group("evaluate_scripts");
    group.throughput(Throughput::Elements(WORKLOAD as u64));

    group.bench_function(BenchmarkId::new("sequential", WORKLOAD), |b| {
        b.iter(|| {
            let results = evaluate_scripts_sequential(&judge, &rubric, &work, 1);
            assert!(results.iter().all(Result::is_ok));
            results
        })
    });

    #[cfg(feature = "parallel")]
    for threads in [2, 4, 8] {
        group.bench_function(
            BenchmarkId::new(format!("parallel/{threads}-threads"), WORKLOAD),
            |b| {
                b.iter(|| {
                    let results =
                        evaluate_scripts_parallel(&judge, &rubric, &work, 1, threads)
                            .expect("pool");
                    assert!(results.iter().all(Result::is_ok));
                    results
                })
            },
        );
    }

    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
