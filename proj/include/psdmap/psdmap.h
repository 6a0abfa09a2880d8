#ifndef PSDMAP_H
#define PSDMAP_H

/* C interface to the psdmap library. All functions return a status code;
 * on failure psdmap_last_error() describes the problem (thread-local). */

#include <stddef.h>
#include <stdint.h>

#if defined(PSDMAP_BUILDING)
#define PSDMAP_API __attribute__((visibility("default")))
#else
#define PSDMAP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum psdmap_status {
  PSDMAP_OK = 0,
  PSDMAP_ERR_INVALID_ARGUMENT = 1,
  PSDMAP_ERR_CONFIG = 2,
  PSDMAP_ERR_RUNTIME = 3,
  PSDMAP_ERR_IO = 4,
  PSDMAP_ERR_INTERRUPTED = 5
} psdmap_status;

typedef struct psdmap_config psdmap_config;
typedef struct psdmap_result psdmap_result;
typedef struct psdmap_scene psdmap_scene;
typedef struct psdmap_channel psdmap_channel;

PSDMAP_API const char* psdmap_version(void);
PSDMAP_API const char* psdmap_last_error(void);
/* Dotted name of the offending field for the last PSDMAP_ERR_CONFIG, or "". */
PSDMAP_API const char* psdmap_last_error_field(void);

/* Configuration. scale is "desk" or "paper". */
PSDMAP_API int psdmap_config_default(const char* scale, psdmap_config** out);
PSDMAP_API int psdmap_config_for_figure(const char* figure, const char* scale, psdmap_config** out);
/* A "scale" key in the file selects the base defaults; otherwise desk. */
PSDMAP_API int psdmap_config_load(const char* path, psdmap_config** out);
PSDMAP_API int psdmap_config_parse(const char* json, psdmap_config** out);
PSDMAP_API int psdmap_config_set_seed(psdmap_config* cfg, uint64_t seed);
PSDMAP_API int psdmap_config_set_output_dir(psdmap_config* cfg, const char* dir);
PSDMAP_API int psdmap_config_set_jobs(psdmap_config* cfg, size_t jobs);
PSDMAP_API int psdmap_config_set_snapshots(psdmap_config* cfg, size_t snapshots);
PSDMAP_API int psdmap_config_validate(const psdmap_config* cfg);
/* Writes up to cap bytes including the terminator; *needed gets the full size. */
PSDMAP_API int psdmap_config_to_json(const psdmap_config* cfg, char* buf, size_t cap, size_t* needed);
PSDMAP_API void psdmap_config_destroy(psdmap_config* cfg);

/* Experiments. resume != 0 reuses finished cells from an earlier run. */
PSDMAP_API int psdmap_run(const psdmap_config* cfg, int resume, psdmap_result** out);
/* Asks running experiments to stop after their current snapshots. */
PSDMAP_API void psdmap_request_interrupt(void);
PSDMAP_API void psdmap_clear_interrupt(void);

PSDMAP_API size_t psdmap_result_trial_count(const psdmap_result* res);
PSDMAP_API size_t psdmap_result_cells_total(const psdmap_result* res);
PSDMAP_API size_t psdmap_result_cells_reused(const psdmap_result* res);
PSDMAP_API size_t psdmap_result_file_count(const psdmap_result* res);
PSDMAP_API const char* psdmap_result_file(const psdmap_result* res, size_t index);
/* Fraction of failed reconstructions of a method over the whole run. */
PSDMAP_API int psdmap_result_fail_fraction(const psdmap_result* res, const char* method, double* out);
/* Pooled AUC of a method at one SNR (use INFINITY for noiseless). */
PSDMAP_API int psdmap_result_auc(const psdmap_result* res, const char* method, double snr_db, double* out);
PSDMAP_API void psdmap_result_destroy(psdmap_result* res);

/* Scenes and channels built from a configuration. */
PSDMAP_API int psdmap_scene_generate(const psdmap_config* cfg, uint64_t seed, psdmap_scene** out);
PSDMAP_API int psdmap_scene_load(const char* path, psdmap_scene** out);
PSDMAP_API int psdmap_scene_save(const psdmap_scene* scene, const char* path);
PSDMAP_API int psdmap_scene_write_occupancy_csv(const psdmap_scene* scene, const char* path);
PSDMAP_API size_t psdmap_scene_sensor_count(const psdmap_scene* scene);
PSDMAP_API size_t psdmap_scene_psd_length(const psdmap_scene* scene);
/* Copies the ground-truth PSD of one sensor into out[0..psd_length). */
PSDMAP_API int psdmap_scene_psd(const psdmap_scene* scene, size_t sensor, double* out, size_t len);
PSDMAP_API void psdmap_scene_destroy(psdmap_scene* scene);

/* measurements is the per-sensor sample count (filter length). */
PSDMAP_API int psdmap_channel_realize(const psdmap_config* cfg, const psdmap_scene* scene, size_t measurements,
                                      psdmap_channel** out);
PSDMAP_API int psdmap_channel_save(const psdmap_channel* ch, const char* path);
PSDMAP_API int psdmap_channel_write_gains_csv(const psdmap_channel* ch, const char* path);
PSDMAP_API void psdmap_channel_destroy(psdmap_channel* ch);

#ifdef __cplusplus
}
#endif

#endif /* PSDMAP_H */
