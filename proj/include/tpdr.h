/* C interface to the differentiable tri-plane renderer. All functions return
 * TPDR_OK or an error status; tpdr_last_error() holds a thread-local message
 * for the most recent failure on the calling thread. Strings returned through
 * `char**` out-parameters are heap-allocated and must be released with
 * tpdr_free_string(). */
#ifndef TPDR_H
#define TPDR_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tpdr_status {
  TPDR_OK = 0,
  TPDR_ERR_INVALID_ARG = 1, /* bad parameter or contract violation */
  TPDR_ERR_IO = 2,          /* missing path, unopenable file, short write */
  TPDR_ERR_PARSE = 3,       /* malformed JSON, image, or checkpoint content */
  TPDR_ERR_NUMERIC = 4,     /* divergence or non-finite values at runtime */
  TPDR_ERR_INTERNAL = 5     /* unexpected failure */
} tpdr_status;

const char* tpdr_version(void);
const char* tpdr_status_name(tpdr_status status);

/* Message for the last failing call on this thread; empty string if none. */
const char* tpdr_last_error(void);

void tpdr_free_string(char* s);

/* Training configuration defaults as a JSON object. */
tpdr_status tpdr_default_config(char** json_out);

/* Writes a synthetic scene directory (targets, cameras, manifest, and for
 * head scenes the morphable model). kind: "blob_field" or "textured_head". */
tpdr_status tpdr_gen_scene(const char* kind, uint64_t seed, int resolution,
                           int samples_per_ray, const char* out_dir);

/* Overfits a fresh model to the scene. config_json overrides defaults and may
 * be NULL; log_csv_out (per-step CSV) and summary_json_out may be NULL. */
tpdr_status tpdr_train(const char* scene_dir, const char* config_json,
                       const char* ckpt_out, const char* log_csv_out,
                       char** summary_json_out);

/* A loaded checkpoint: trained planes, radiance head, optional deformation
 * module with its coordinate-code pairs, and the base camera. */
typedef struct tpdr_checkpoint tpdr_checkpoint;

tpdr_status tpdr_checkpoint_load(const char* path, tpdr_checkpoint** out);
void tpdr_checkpoint_free(tpdr_checkpoint* ckpt);

/* Entry names/shapes plus the stored metadata, as JSON. */
tpdr_status tpdr_checkpoint_info(const tpdr_checkpoint* ckpt, char** json_out);

/* Renders to a PPM. camera_json_path NULL uses the checkpoint's base camera. */
tpdr_status tpdr_checkpoint_render(const tpdr_checkpoint* ckpt,
                                   const char* camera_json_path,
                                   const char* out_ppm);

/* One-shot load + render. */
tpdr_status tpdr_render(const char* ckpt_path, const char* camera_json_path,
                        const char* out_ppm);

/* Renders `steps` frames with yaw evenly spaced over [yaw_min_deg,
 * yaw_max_deg] (inclusive; a single step uses the midpoint) into
 * out_dir/frame_###.ppm plus a pose manifest.json. */
tpdr_status tpdr_orbit(const char* ckpt_path, double yaw_min_deg,
                       double yaw_max_deg, int steps, const char* out_dir);

/* Rasterizes the coordinate-code image of a morphable model under the given
 * coefficients. coeffs_json_path: {"z_shp": [...], "z_exp": [...], optional
 * "R" (9, row-major), "t" (3)}. The camera is frontal at `resolution`. */
tpdr_status tpdr_secc(const char* model_path, const char* coeffs_json_path,
                      int resolution, const char* out_ppm);

/* Finite-difference gradient validation. component: "ops", "planes",
 * "encoder", "head", "led", "render", or "all". Writes a JSON report; the
 * status is TPDR_OK even when a component exceeds tolerance (the report's
 * "pass" field carries the verdict). */
tpdr_status tpdr_gradcheck(const char* component, uint64_t seed,
                           char** report_json_out);

/* PSNR/SSIM between two PPMs, masked by a PGM (pixels > 50% included);
 * mask_pgm NULL compares every pixel. */
tpdr_status tpdr_metrics(const char* a_ppm, const char* b_ppm,
                         const char* mask_pgm, char** report_json_out);

#ifdef __cplusplus
}
#endif

#endif /* TPDR_H */
