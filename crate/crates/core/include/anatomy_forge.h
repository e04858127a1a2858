/* C interface of the anatomy-forge shared library (libanatomy_forge). */
#ifndef ANATOMY_FORGE_H
#define ANATOMY_FORGE_H

#include <stddef.h>
#include <stdint.h>

#define AF_OK 0
#define AF_USAGE 1
#define AF_DATA 2

typedef struct AfGenerator AfGenerator;

/* graph_path and config_json may be NULL. Returns NULL on failure. */
AfGenerator *af_open_generator(const char *bank_path, const char *anchors_path,
                               const char *graph_path, const char *config_json);
void af_close_generator(AfGenerator *handle);

/* Writes the scene dimensions (x, y, z) to dims_out[0..3]. */
int32_t af_dims(const AfGenerator *handle, size_t *dims_out);

/* Fills image_out and labels_out (len voxels each, x fastest) with pair
 * `index`. If manifest_out is not NULL it receives a JSON string to release
 * with af_free_string. */
int32_t af_next_pair(const AfGenerator *handle, int64_t index, float *image_out,
                     uint8_t *labels_out, size_t len, char **manifest_out);
void af_free_string(char *s);

/* Message of the last failure on the calling thread. */
const char *af_last_error(void);

#endif
