use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion};
use repoctx::dataset_io::ContextKind;
use repoctx::fid::{encode_packed, vocab_for, Fid, ModelConfig};
use repoctx::hole_gen::generate_holes;
use repoctx::packing::{chunk_ppc, PackingConfig};
use repoctx::pipeline::{pack_holes, scan_corpus, BuildOptions, RepoContexts};
use repoctx::retrieval::{text_tokens, Bm25Index, Bm25Params};

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/mini_corpus")
}

fn retrieval(c: &mut Criterion) {
    let repos = scan_corpus(&corpus()).unwrap();
    let index = &repos[0];
    let holes = generate_holes(index, 0, 64);
    let bm25 = Bm25Index::new(index);
    let query = text_tokens(&holes[0].surrounding_context);
    c.bench_function("bm25_rank", |b| {
        b.iter(|| {
            bm25.rank(
                black_box(&query),
                Some(&holes[0].rel_path),
                Bm25Params::default(),
            )
        })
    });
    c.bench_function("bm25_index", |b| {
        b.iter(|| Bm25Index::new(black_box(index)))
    });
}

fn packing(c: &mut Criterion) {
    let repos = scan_corpus(&corpus()).unwrap();
    let index = &repos[1];
    let holes = generate_holes(index, 0, 32);
    let options = BuildOptions::default();
    let text: String = index
        .files
        .values()
        .map(|f| f.source.content.as_str())
        .collect();
    c.bench_function("chunk_ppc_768", |b| {
        b.iter(|| chunk_ppc(black_box(&text), 768))
    });
    let ctx = RepoContexts::new(index, &options);
    c.bench_function("pp_ranked_contexts", |b| {
        b.iter(|| ctx.ranked(ContextKind::Pp, black_box(&holes[0])).unwrap())
    });
    let mut group = c.benchmark_group("pack_32_holes");
    group.sample_size(20);
    for kind in ContextKind::ALL {
        group.bench_function(kind.as_str(), |b| {
            b.iter(|| pack_holes(index, black_box(&holes), kind, &options).unwrap())
        });
    }
    group.finish();
}

fn fid(c: &mut Criterion) {
    let repos = scan_corpus(&corpus()).unwrap();
    let index = &repos[2];
    let holes = generate_holes(index, 0, 16);
    let options = BuildOptions {
        packing: PackingConfig {
            n_contexts: 4,
            context_len: 32,
            ..PackingConfig::default()
        },
        ..BuildOptions::default()
    };
    let packed = pack_holes(index, &holes, ContextKind::Pp, &options).unwrap();
    let vocab = vocab_for(&packed);
    let model = Fid::new(ModelConfig::new(vocab.len(), 4, 32)).unwrap();
    let params = model.init(0);
    let ex = encode_packed(&vocab, &packed[0], 32);
    c.bench_function("fid_forward", |b| {
        b.iter(|| model.forward(&params, black_box(&ex)).unwrap())
    });
    c.bench_function("fid_loss_and_grad", |b| {
        b.iter(|| model.loss_and_grad(&params, black_box(&ex)).unwrap())
    });
}

criterion_group!(benches, retrieval, packing, fid);
criterion_main!(benches);
