/* Copyright 2026 The HREB-CRF Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the HREB-CRF tagger. Every call returns an hreb_status; on
 * failure hreb_last_error() describes the problem (per thread). Strings
 * returned through char** are owned by the caller and released with
 * hreb_string_free. */

#ifndef HREB_HREB_H_
#define HREB_HREB_H_

#include <stddef.h>

#if defined(_WIN32)
#define HREB_API __declspec(dllexport)
#else
#define HREB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as CLI exit codes. */
typedef enum hreb_status {
  HREB_OK = 0,
  HREB_VERIFY_FAILED = 1,
  HREB_CONFIG_ERROR = 2, /* bad config, argument, or corpus data */
  HREB_CHECKPOINT_ERROR = 3,
  HREB_DIVERGENCE = 4,
  HREB_INTERNAL_ERROR = 5
} hreb_status;

typedef struct hreb_model hreb_model;

typedef struct hreb_prf {
  double precision;
  double recall;
  double f1;
  size_t gold;
  size_t predicted;
  size_t correct;
} hreb_prf;

HREB_API const char* hreb_version(void);
HREB_API const char* hreb_last_error(void);
HREB_API void hreb_string_free(char* s);

/* Called after every epoch with the mean training loss and validation F1. */
typedef void (*hreb_epoch_callback)(size_t epoch, double loss, double valid_f1, void* user);

/* Trains from a config file (may be NULL) plus "key=value" overrides.
 * Writes best.ckpt, final.ckpt, metrics.log and summary.json into out_dir
 * (NULL: nothing written). progress and summary are optional. */
HREB_API hreb_status hreb_train(const char* config_path, const char* const* overrides, size_t n_overrides,
                                const char* out_dir, hreb_epoch_callback progress, void* user, char** summary);

/* Trains one model per row of the {naive, hema} x {off, dynamic} matrix and
 * returns the comparison table. */
HREB_API hreb_status hreb_ablate(const char* config_path, const char* const* overrides, size_t n_overrides,
                                 char** table);

HREB_API hreb_status hreb_model_load(const char* path, hreb_model** out);
HREB_API hreb_status hreb_model_save(const hreb_model* model, const char* path);
HREB_API void hreb_model_free(hreb_model* model);

/* Span-level evaluation on a CoNLL corpus. Either output may be NULL. */
HREB_API hreb_status hreb_eval(const hreb_model* model, const char* corpus_path, hreb_prf* micro, char** report);

/* Tags for n tokens, written as one space-separated string. */
HREB_API hreb_status hreb_predict_tokens(const hreb_model* model, const char* const* tokens, size_t n, char** tags);

/* One whitespace-tokenized sentence per input line; writes "token tag" lines
 * with a blank line after each sentence. Empty lines are skipped and counted. */
HREB_API hreb_status hreb_predict_file(const hreb_model* model, const char* in_path, const char* out_path,
                                       size_t* skipped);

/* JSON dump of per-stage scores, weights, gamma/phi gates, residual gates and
 * decoded spans for one sentence. Text without whitespace is split into
 * characters. */
HREB_API hreb_status hreb_inspect(const hreb_model* model, const char* sentence, char** json);

/* suite: "all", "grad", "crf" or "ema". inject_grad_fault scales the matmul
 * left-operand gradient by 0.9 for the duration of the call. */
HREB_API hreb_status hreb_verify(const char* suite, int inject_grad_fault, char** report);

/* Corpus statistics table. Each path is a CoNLL file (train split only) or a
 * directory whose file names contain "train", "dev"/"valid" and "test"; a
 * directory without a dev file reports the test split as validation. */
HREB_API hreb_status hreb_stats(const char* const* paths, size_t n, char** table);

#ifdef __cplusplus
}
#endif

#endif /* HREB_HREB_H_ */
