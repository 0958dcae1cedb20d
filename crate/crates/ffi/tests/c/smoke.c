#include <math.h>
#include <stdio.h>
#include "nativespline.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (line %d)\n", #cond, __LINE__); return 1; } } while (0)

int main(void) {
    NsOperator *op = NULL;
    CHECK(ns_operator_new(1, &op) == NS_STATUS_OK);
    double g = 0.0;
    CHECK(ns_green(op, 1.0, &g) == NS_STATUS_OK && g == 0.5);

    double xs[] = {0.0, 1.0, 2.0};
    double ys[] = {0.0, 1.0, 0.0};
    NsSolution *sol = NULL;
    CHECK(ns_solve_gtv(op, xs, ys, 3, 0, &sol) == NS_STATUS_OK);
    double obj = 0.0, res = 1.0;
    size_t knots = 0;
    CHECK(ns_solution_summary(sol, &obj, &res, &knots) == NS_STATUS_OK);
    CHECK(fabs(obj - 2.0) < 1e-9 && knots <= 2);
    double vals[3];
    CHECK(ns_solution_evaluate(sol, xs, 3, vals) == NS_STATUS_OK);
    for (int i = 0; i < 3; i++) CHECK(fabs(vals[i] - ys[i]) < 1e-9);
    ns_solution_free(sol);

    NsOperator *bad = NULL;
    CHECK(ns_operator_new(0, &bad) == NS_STATUS_INVALID_ARGUMENT && bad == NULL);
    char msg[256];
    CHECK(ns_last_error_message(msg, sizeof msg) > 0);

    ns_operator_free(op);
    printf("ok %s\n", ns_version());
    return 0;
}
