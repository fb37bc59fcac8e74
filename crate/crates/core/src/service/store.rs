use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{RwLock, RwLockReadGuard};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mesh::{load_mesh_bytes, LoadOptions, MeshFormat, TriangleMesh, ValidationReport};
use crate::pipeline::PipelineParams;

const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRecord {
    pub id: String,
    pub name: Option<String>,
    pub format: MeshFormat,
    /// Blob path relative to the data directory.
    pub file: String,
    pub bytes: u64,
    pub validation: ValidationReport,
    /// Last region set stored with `PUT /meshes/{id}/regions`.
    pub regions: Option<PipelineParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Decompose,
    ErrorEval,
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub progress: f64,
    pub mesh_id: String,
    pub params: serde_json::Value,
    /// Result path relative to the data directory, once done.
    pub result: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    meshes: BTreeMap<String, MeshRecord>,
    jobs: BTreeMap<String, Job>,
}

/// Disk-backed store: mesh blobs named by content hash, job outputs in
/// per-job directories, and a JSON index rewritten on every change.
/// Writers hold the index lock while the index file is replaced, so there
/// is one writer at a time and readers never see a half-applied change.
pub struct Store {
    dir: PathBuf,
    index: RwLock<Index>,
}

impl Store {
    /// Opens or creates a store. Jobs left queued or running by a previous
    /// process are marked failed.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Store> {
        let dir = dir.into();
        for sub in ["blobs", "jobs"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let path = dir.join(INDEX_FILE);
        let mut index: Index = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Index::default(),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let mut interrupted = 0;
        for job in index.jobs.values_mut() {
            if matches!(job.state, JobState::Queued | JobState::Running) {
                job.state = JobState::Failed;
                job.error = Some("interrupted by service restart".into());
                interrupted += 1;
            }
        }
        let store = Store { dir, index: RwLock::new(index) };
        if interrupted > 0 {
            log::warn!("{interrupted} unfinished jobs marked failed");
            store.persist(&store.read())?;
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn read(&self) -> RwLockReadGuard<'_, Index> {
        self.index.read().unwrap_or_else(|e| e.into_inner())
    }

    fn persist(&self, index: &Index) -> Result<()> {
        let path = self.dir.join(INDEX_FILE);
        let tmp = self.dir.join("index.json.tmp");
        let text = serde_json::to_string_pretty(index).expect("index serializes");
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    fn update<T>(&self, f: impl FnOnce(&mut Index) -> T) -> Result<T> {
        let mut index = self.index.write().unwrap_or_else(|e| e.into_inner());
        let out = f(&mut index);
        self.persist(&index)?;
        Ok(out)
    }

    /// Parses, validates and stores an uploaded mesh. Uploading the same
    /// bytes twice returns the same record.
    pub fn add_mesh(&self, bytes: &[u8], format: MeshFormat, name: Option<String>, force: bool) -> Result<MeshRecord> {
        let mesh = load_mesh_bytes(bytes, format, LoadOptions { force })?;
        let hash: String = Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect();
        let id = hash[..32].to_string();
        if let Some(rec) = self.read().meshes.get(&id) {
            return Ok(rec.clone());
        }
        let format = match format {
            MeshFormat::Auto => MeshFormat::detect(bytes),
            f => f,
        };
        let ext = if format == MeshFormat::Stl { "stl" } else { "obj" };
        let file = format!("blobs/{hash}.{ext}");
        let path = self.dir.join(&file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        let rec = MeshRecord {
            id: id.clone(),
            name,
            format,
            file,
            bytes: bytes.len() as u64,
            validation: mesh.validate(),
            regions: None,
        };
        self.update(|ix| ix.meshes.entry(id).or_insert(rec).clone())
    }

    pub fn mesh(&self, id: &str) -> Option<MeshRecord> {
        self.read().meshes.get(id).cloned()
    }

    pub fn load_mesh(&self, rec: &MeshRecord) -> Result<TriangleMesh> {
        let path = self.dir.join(&rec.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        load_mesh_bytes(&bytes, rec.format, LoadOptions { force: !rec.validation.watertight })
    }

    pub fn mesh_bytes(&self, rec: &MeshRecord) -> Result<Vec<u8>> {
        let path = self.dir.join(&rec.file);
        fs::read(&path).map_err(|e| Error::io(&path, e))
    }

    pub fn set_regions(&self, id: &str, params: PipelineParams) -> Result<bool> {
        self.update(|ix| match ix.meshes.get_mut(id) {
            Some(rec) => {
                rec.regions = Some(params);
                true
            }
            None => false,
        })
    }

    pub fn insert_job(&self, job: Job) -> Result<()> {
        self.update(|ix| {
            ix.jobs.insert(job.id.clone(), job);
        })
    }

    pub fn job(&self, id: &str) -> Option<Job> {
        self.read().jobs.get(id).cloned()
    }

    pub fn update_job(&self, id: &str, f: impl FnOnce(&mut Job)) -> Result<()> {
        self.update(|ix| {
            if let Some(job) = ix.jobs.get_mut(id) {
                f(job);
            }
        })
    }

    /// Output directory of a job, relative to the data directory.
    pub fn job_dir(id: &str) -> String {
        format!("jobs/{id}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mesh::write_obj;

    #[test]
    fn upload_is_content_addressed_and_survives_reopen() {
        let tmp = tempfile::tempdir().unwrap();
        let obj = write_obj(&fixtures::unit_cube());
        let store = Store::open(tmp.path()).unwrap();
        let a = store.add_mesh(obj.as_bytes(), MeshFormat::Auto, None, false).unwrap();
        let b = store.add_mesh(obj.as_bytes(), MeshFormat::Obj, Some("cube".into()), false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.format, MeshFormat::Obj);
        store
            .insert_job(Job {
                id: "j".into(),
                kind: JobKind::Decompose,
                state: JobState::Running,
                progress: 0.0,
                mesh_id: a.id.clone(),
                params: serde_json::Value::Null,
                result: None,
                error: None,
            })
            .unwrap();
        drop(store);
        let store = Store::open(tmp.path()).unwrap();
        assert_eq!(store.mesh(&a.id).unwrap(), a);
        assert_eq!(store.load_mesh(&a).unwrap().faces().len(), 12);
        let job = store.job("j").unwrap();
        assert_eq!(job.state, JobState::Failed);
    }
}
