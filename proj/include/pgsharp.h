/* pgsharp: hyperspectral pansharpening toolkit, C interface.
 *
 * All functions are thread-compatible: distinct threads may operate on
 * distinct handles concurrently. Error messages are per-thread; query
 * pgsharp_last_error() on the thread that observed the failure.
 */
#ifndef PGSHARP_H
#define PGSHARP_H

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum pgsharp_status {
    PGSHARP_OK = 0,
    PGSHARP_ERR_CONFIG = 2,  /* bad options, dimensions, or file content */
    PGSHARP_ERR_IO = 3,      /* missing or unwritable files */
    PGSHARP_ERR_NUMERIC = 4  /* non-finite values during computation */
} pgsharp_status;

/* Message for the most recent failure on this thread; "" when none. The
 * pointer stays valid until the next pgsharp call on the same thread. */
const char* pgsharp_last_error(void);

/* Semantic version of the library. */
const char* pgsharp_version(void);

/* Opaque hyperspectral cube: band-sequential 32-bit float raster. A
 * single-band cube doubles as a panchromatic image. */
typedef struct pgsharp_cube pgsharp_cube;

/* Create from a band-sequential buffer of bands*height*width floats; the
 * buffer is copied. data may be NULL for a zero-filled cube. */
pgsharp_status pgsharp_cube_create(int bands, int height, int width, const float* data,
                                   pgsharp_cube** out);

/* Read/write the on-disk pair <path>.json + <path>.f32. */
pgsharp_status pgsharp_cube_read(const char* path, pgsharp_cube** out);
pgsharp_status pgsharp_cube_write(const pgsharp_cube* cube, const char* path);

void pgsharp_cube_free(pgsharp_cube* cube);

/* Accessors return 0 / NULL on a NULL handle. The data pointer is owned by
 * the cube and valid until pgsharp_cube_free. */
int pgsharp_cube_bands(const pgsharp_cube* cube);
int pgsharp_cube_height(const pgsharp_cube* cube);
int pgsharp_cube_width(const pgsharp_cube* cube);
const float* pgsharp_cube_data(const pgsharp_cube* cube);

/* Full quality report of a prediction against a reference. */
typedef struct pgsharp_metrics {
    double psnr;
    double ssim;
    double sam;
    double ergas;
    double scc;
} pgsharp_metrics;

pgsharp_status pgsharp_compare(const pgsharp_cube* pred, const pgsharp_cube* ref, int ratio,
                               pgsharp_metrics* out);

/* Run one pipeline command by name: "simulate", "fish", "train", "fuse",
 * "evaluate", or "inspect". options_json holds the command's options as a
 * JSON object (NULL or "" means {}). On success, *result_json (when
 * result_json is non-NULL) receives the command's manifest/result as a
 * heap-allocated JSON string; release it with pgsharp_free. */
pgsharp_status pgsharp_run(const char* command, const char* options_json, char** result_json);

void pgsharp_free(char* p);

#ifdef __cplusplus
}
#endif

#endif /* PGSHARP_H */
