use super::method::Method;
use crate::baselines::{growing_spheres, latent_gradient, latent_random, scfe, BaselineConfig, FaceVariant};
use crate::bundle::ModelBundle;
use crate::recourse::{recourse_with_selection, RecourseOutcome, RecourseRequest};
use crate::Result;

/// Runs one method on one encoded instance. DEAR uses `request`; the
/// baselines use `baselines`, including its seed. CAEs and FACE graphs come
/// from the bundle's caches.
pub fn run_method(
    bundle: &ModelBundle,
    method: Method,
    x: &[f64],
    request: &RecourseRequest,
    baselines: &BaselineConfig,
) -> Result<RecourseOutcome> {
    let clf = bundle.classifier();
    let frozen = bundle.encoder().immutable_columns();
    match method {
        Method::Dear => recourse_with_selection(x, clf, bundle.encoder(), bundle, request),
        Method::Scfe => scfe(x, clf, &frozen, baselines),
        Method::Gs => growing_spheres(x, clf, &frozen, baselines),
        Method::Revise => latent_gradient(x, clf, bundle.plain_autoencoder()?.as_ref(), baselines),
        Method::Cchvae => latent_random(x, clf, bundle.plain_autoencoder()?.as_ref(), baselines),
        Method::FaceK => bundle.face_graph(FaceVariant::Knn(baselines.face.k))?.query(x, clf),
        Method::FaceE => bundle.face_graph(FaceVariant::Epsilon(baselines.face.epsilon))?.query(x, clf),
    }
}
