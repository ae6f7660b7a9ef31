#include <math.h>
#include <stdio.h>
#include <string.h>

#include "cantor_shrink.h"

#define CHECK(cond)                                                        \
  do {                                                                     \
    if (!(cond)) {                                                         \
      const char *msg = cs_last_error_message();                           \
      fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond, msg ? msg : ""); \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  CsSequence *q = NULL, *alpha = NULL;
  CHECK(cs_sequence_new("periodic:2,3", CS_TARGET_BASE, &q) == CS_STATUS_OK);
  CHECK(cs_sequence_new("const:1", CS_TARGET_WEIGHT, &alpha) == CS_STATUS_OK);

  CsEstimate est;
  CHECK(cs_dimension_limsup(q, alpha, 1000, 0.5, &est) == CS_STATUS_OK);
  double expected = log(6.0) / (log(6.0) + 2.0);
  CHECK(fabs(est.value - expected) < 1e-12);
  CHECK(est.flag == CS_FLAG_NONE);

  CsVerdict v;
  CHECK(cs_hit_test(q, alpha, "1/7", 1, 128, &v) == CS_STATUS_OK);
  CHECK(v == CS_VERDICT_HIT);

  char *s = NULL;
  CHECK(cs_iterate(q, "1/7", 3, &s) == CS_STATUS_OK);
  CHECK(strcmp(s, "5/7") == 0);
  cs_string_free(s);

  CsSequence *bad = NULL;
  CHECK(cs_sequence_new("expr:n+", CS_TARGET_BASE, &bad) == CS_STATUS_PARSE);
  CHECK(bad == NULL);
  CHECK(cs_last_error_message() != NULL);

  cs_sequence_free(q);
  cs_sequence_free(alpha);
  puts("ok");
  return 0;
}
