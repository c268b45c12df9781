use std::collections::HashSet;
use std::sync::Arc;

use silverloop_core::active::{
    AdjudicationRecord, AdjudicationStore, AnnotationRecord, AnnotationSource, AnnotationStore,
};
use silverloop_core::{Error, TaskId};
use tokio::sync::{mpsc, oneshot, watch};

use crate::queue::LabelItem;

type LabelKey = (String, TaskId, String, AnnotationSource);

/// Everything the stores hold, as of one point in the write sequence.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    pub annotations: Vec<AnnotationRecord>,
    pub adjudications: Vec<AdjudicationRecord>,
    label_keys: HashSet<LabelKey>,
    label_any: HashSet<(String, TaskId, AnnotationSource)>,
    verdict_keys: HashSet<(String, String)>,
    verdict_any: HashSet<String>,
}

impl Snapshot {
    fn push_annotation(&mut self, r: AnnotationRecord) {
        self.label_any.insert((r.dedup_key.clone(), r.task, r.source));
        self.label_keys.insert(r.key());
        self.annotations.push(r);
    }

    fn push_adjudication(&mut self, r: AdjudicationRecord) {
        self.verdict_any.insert(r.blinding_id.clone());
        self.verdict_keys.insert(r.key());
        self.adjudications.push(r);
    }

    pub fn has_label(&self, key: &LabelKey) -> bool {
        self.label_keys.contains(key)
    }

    pub fn label_answered_by_anyone(&self, item: &LabelItem) -> bool {
        self.label_any
            .contains(&(item.dedup_key.clone(), item.task, item.source))
    }

    pub fn has_verdict(&self, blinding_id: &str, annotator: &str) -> bool {
        self.verdict_keys
            .contains(&(blinding_id.to_string(), annotator.to_string()))
    }

    pub fn verdict_by_anyone(&self, blinding_id: &str) -> bool {
        self.verdict_any.contains(blinding_id)
    }
}

pub enum Record {
    Annotation(AnnotationRecord),
    Adjudication(AdjudicationRecord),
}

type Command = (Record, oneshot::Sender<Result<(), Error>>);

/// Handle to the one thread allowed to append to the stores.
#[derive(Clone)]
pub struct Writer {
    tx: mpsc::Sender<Command>,
}

impl Writer {
    /// Replays both stores into the first snapshot and starts the writer
    /// thread. The thread exits once every handle is dropped.
    pub fn spawn(
        mut annotations: AnnotationStore,
        mut adjudications: AdjudicationStore,
    ) -> (Writer, watch::Receiver<Arc<Snapshot>>) {
        let mut first = Snapshot::default();
        for r in annotations.records() {
            first.push_annotation(r.clone());
        }
        for r in adjudications.records() {
            first.push_adjudication(r.clone());
        }
        let (snap_tx, snap_rx) = watch::channel(Arc::new(first));
        let (tx, mut rx) = mpsc::channel::<Command>(256);
        std::thread::Builder::new()
            .name("store-writer".into())
            .spawn(move || {
                while let Some((record, reply)) = rx.blocking_recv() {
                    let result = match record {
                        Record::Annotation(r) => annotations.append(r.clone()).map(|()| {
                            snap_tx.send_modify(|s| Arc::make_mut(s).push_annotation(r));
                        }),
                        Record::Adjudication(r) => adjudications.append(r.clone()).map(|()| {
                            snap_tx.send_modify(|s| Arc::make_mut(s).push_adjudication(r));
                        }),
                    };
                    let _ = reply.send(result);
                }
            })
            .expect("spawn writer thread");
        (Writer { tx }, snap_rx)
    }

    /// Resolves once the record is on disk, or with the store's rejection.
    pub async fn write(&self, record: Record) -> Result<(), Error> {
        let (reply, rx) = oneshot::channel();
        let gone = || Error::Precondition("store writer stopped".into());
        self.tx.send((record, reply)).await.map_err(|_| gone())?;
        rx.await.map_err(|_| gone())?
    }
}
