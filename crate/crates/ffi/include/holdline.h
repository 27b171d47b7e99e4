#ifndef HOLDLINE_H
#define HOLDLINE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HlStatus {
  HL_STATUS_OK = 0,
  HL_STATUS_NULL_POINTER = 1,
  HL_STATUS_INVALID_ARGUMENT = 2,
  HL_STATUS_IO = 3,
  HL_STATUS_VALIDATION = 4,
  HL_STATUS_DIVERGED = 5,
  HL_STATUS_OUT_OF_RANGE = 6,
  HL_STATUS_PANIC = 7,
} HlStatus;

/**
 * The log and indices of one simulated episode.
 */
typedef struct HlEpisode HlEpisode;

/**
 * A validated bus line ready to simulate.
 */
typedef struct HlLine HlLine;

/**
 * A trained or loaded holding policy.
 */
typedef struct HlNetwork HlNetwork;

/**
 * Headline indices of an episode.
 */
typedef struct HlReport {
  double fsi;
  double ssi;
  double sum_sigma;
  size_t n_stages;
  bool bunching;
  double a_sigma;
  double a_bar;
  double sigma_a;
  size_t n_controlled;
} HlReport;

/**
 * One activation of a bus at a stop. Bus and stop ids are 0-based.
 */
typedef struct HlStage {
  double time_s;
  size_t bus;
  size_t stop;
  double hold_s;
  bool controlled;
  double mean_h_s;
  double sigma_h_s;
} HlStage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *hl_last_error(void);

/**
 * Library version as a static string.
 */
const char *hl_version(void);

/**
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum HlStatus hl_line_builtin(const char *name, struct HlLine **out);

/**
 * Loads a line from a TOML file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum HlStatus hl_line_load(const char *path, struct HlLine **out);

/**
 * # Safety
 * `line` must be null or a handle from `hl_line_builtin`/`hl_line_load` not yet freed.
 */
void hl_line_free(struct HlLine *line);

/**
 * Number of stops and buses.
 *
 * # Safety
 * `line` must be a live handle; the outputs must be writable.
 */
enum HlStatus hl_line_size(const struct HlLine *line, size_t *n_stops, size_t *n_buses);

/**
 * Expected system headway of the line, in seconds.
 *
 * # Safety
 * `line` must be a live handle; `out` must be writable.
 */
enum HlStatus hl_line_esh(const struct HlLine *line, double *out);

/**
 * Trains a Q-learning policy (`scheme` is "OQL" or "QL<n>S") with default
 * settings apart from the episode count and seed.
 *
 * # Safety
 * `line` must be a live handle, `scheme` a NUL-terminated string, `out` writable.
 */
enum HlStatus hl_network_train(const struct HlLine *line,
                               const char *scheme,
                               size_t episodes,
                               uint64_t seed,
                               struct HlNetwork **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum HlStatus hl_network_load(const char *path, struct HlNetwork **out);

/**
 * # Safety
 * `network` must be a live handle and `path` a NUL-terminated string.
 */
enum HlStatus hl_network_save(const struct HlNetwork *network, const char *path);

/**
 * Input width of the network: two per bus, one per stop and the hold.
 *
 * # Safety
 * `network` must be a live handle; `out` must be writable.
 */
enum HlStatus hl_network_inputs(const struct HlNetwork *network, size_t *out);

/**
 * Evaluates the network on `len` normalised inputs.
 *
 * # Safety
 * `network` must be a live handle, `inputs` must point to `len` values and `out` be writable.
 */
enum HlStatus hl_network_forward(const struct HlNetwork *network,
                                 const double *inputs,
                                 size_t len,
                                 double *out);

/**
 * # Safety
 * `network` must be null or a live handle.
 */
void hl_network_free(struct HlNetwork *network);

/**
 * Simulates one episode under `scheme`. Q-learning schemes need `network`;
 * the others ignore it and accept null.
 *
 * # Safety
 * `line` must be a live handle, `network` null or live, `scheme` a
 * NUL-terminated string and `out` writable.
 */
enum HlStatus hl_episode_run(const struct HlLine *line,
                             const char *scheme,
                             const struct HlNetwork *network,
                             uint64_t seed,
                             struct HlEpisode **out);

/**
 * # Safety
 * `episode` must be a live handle; `out` must be writable.
 */
enum HlStatus hl_episode_report(const struct HlEpisode *episode, struct HlReport *out);

/**
 * # Safety
 * `episode` must be a live handle; `out` must be writable.
 */
enum HlStatus hl_episode_stage_count(const struct HlEpisode *episode, size_t *out);

/**
 * # Safety
 * `episode` must be a live handle; `out` must be writable.
 */
enum HlStatus hl_episode_stage(const struct HlEpisode *episode, size_t index, struct HlStage *out);

/**
 * Writes stages.csv, passengers.csv and trajectories.csv into `dir`.
 *
 * # Safety
 * `episode` must be a live handle and `dir` a NUL-terminated string.
 */
enum HlStatus hl_episode_export(const struct HlEpisode *episode, const char *dir);

/**
 * # Safety
 * `episode` must be null or a live handle.
 */
void hl_episode_free(struct HlEpisode *episode);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOLDLINE_H */
