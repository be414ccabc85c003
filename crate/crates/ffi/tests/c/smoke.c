#include <math.h>
#include <stdio.h>
#include "speclab.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (line %d)\n", #cond, __LINE__); return 1; } } while (0)

int main(void) {
    SpeclabComplex s = {0.3, 7.0}, s1 = {0.7, -7.0}, x, y;
    CHECK(speclab_chi(s, &x) == SPECLAB_STATUS_OK);
    CHECK(speclab_chi(s1, &y) == SPECLAB_STATUS_OK);
    CHECK(fabs(x.re * y.re - x.im * y.im - 1.0) < 1e-10);
    CHECK(fabs(x.re * y.im + x.im * y.re) < 1e-10);

    CHECK(speclab_chi(s, NULL) == SPECLAB_STATUS_NULL_POINTER);

    SpeclabEvaluator *ev = NULL;
    CHECK(speclab_evaluator_new(-1.0, 64, &ev) == SPECLAB_STATUS_INVALID_ARGUMENT);
    CHECK(ev == NULL);
    char msg[256];
    CHECK(speclab_last_error(msg, sizeof msg) > 0);

    CHECK(speclab_evaluator_new(0.5, 64, &ev) == SPECLAB_STATUS_OK);
    SpeclabPoint p;
    SpeclabComplex z = {0.5, 3.0};
    CHECK(speclab_evaluator_point(ev, z, &p) == SPECLAB_STATUS_OK);
    /* Im(-J conj K) = 1 on the critical line */
    double w = -(p.j.im * p.k.re - p.j.re * p.k.im);
    CHECK(fabs(w - 1.0) < 1e-6);
    speclab_evaluator_free(ev);
    speclab_evaluator_free(NULL);
    printf("ok\n");
    return 0;
}
