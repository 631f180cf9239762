/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <unistd.h>

#include "tracks.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
            ++failures;                                               \
        }                                                             \
    } while (0)

static void test_config(void) {
    tracks_config* cfg = NULL;
    const char* v = NULL;
    EXPECT(tracks_config_new(&cfg) == TRACKS_OK);
    EXPECT(tracks_config_key_count() > 40);
    const char *name, *def, *doc;
    EXPECT(tracks_config_key_info(0, &name, &def, &doc) == TRACKS_OK);
    EXPECT(tracks_config_key_info(100000, &name, &def, &doc) == TRACKS_ERR_ARGUMENT);

    EXPECT(tracks_config_get(cfg, "flows", &v) == TRACKS_OK && strcmp(v, "20") == 0);
    EXPECT(tracks_config_set(cfg, "flows", "8") == TRACKS_OK);
    EXPECT(tracks_config_get(cfg, "flows", &v) == TRACKS_OK && strcmp(v, "8") == 0);
    EXPECT(tracks_config_set(cfg, "nope", "1") == TRACKS_ERR_CONFIG);
    EXPECT(strstr(tracks_last_error(), "nope") != NULL);
    EXPECT(tracks_config_validate(cfg) == TRACKS_OK);

    tracks_config* copy = NULL;
    EXPECT(tracks_config_clone(cfg, &copy) == TRACKS_OK);
    EXPECT(tracks_config_hash(copy) == tracks_config_hash(cfg));
    EXPECT(tracks_config_set(copy, "tcp", "sctp") == TRACKS_OK);
    EXPECT(tracks_config_validate(copy) == TRACKS_ERR_CONFIG);
    EXPECT(tracks_config_hash(copy) != tracks_config_hash(cfg));
    tracks_config_free(copy);

    EXPECT(tracks_config_set(NULL, "flows", "1") == TRACKS_ERR_ARGUMENT);
    EXPECT(tracks_config_load(cfg, "/nonexistent/x.conf") == TRACKS_ERR_CONFIG);
    EXPECT(strcmp(tracks_status_name(TRACKS_ERR_EXISTS), "") != 0);
    tracks_config_free(cfg);
}

static void test_run(void) {
    tracks_config* cfg = NULL;
    tracks_result* res = NULL;
    tracks_config_new(&cfg);
    tracks_config_set(cfg, "scenario", "single");
    tracks_config_set(cfg, "single_bytes", "14600");
    EXPECT(tracks_run(cfg, &res) == TRACKS_OK);
    EXPECT(tracks_result_flow_count(res) == 1);

    tracks_flow_record f;
    EXPECT(tracks_result_flow(res, 0, &f) == TRACKS_OK);
    EXPECT(f.completed);
    EXPECT(f.size_bytes == 14600);
    EXPECT(strcmp(f.size_class, "small") == 0);
    EXPECT(f.fct_us > 100 && f.fct_us < 2000);
    EXPECT(tracks_result_flow(res, 1, &f) == TRACKS_ERR_ARGUMENT);

    tracks_flow_diagnostics d;
    EXPECT(tracks_result_diagnostics(res, 0, &d) == TRACKS_OK);
    EXPECT(d.stream_intact);
    EXPECT(d.delivered_bytes == 14600);

    tracks_run_summary s;
    EXPECT(tracks_result_summary(res, &s) == TRACKS_OK);
    EXPECT(s.config_hash == tracks_config_hash(cfg));
    EXPECT(s.events_dispatched > 0);

    double p = 0;
    EXPECT(tracks_result_fct_percentile(res, "small", 95, &p) == TRACKS_OK);
    EXPECT(p == (double)f.fct_us);
    EXPECT(tracks_result_fct_percentile(res, "large", 95, &p) == TRACKS_ERR_ARGUMENT);

    char dir[256];
    snprintf(dir, sizeof dir, "/tmp/tracks_capi_%d", (int)getpid());
    EXPECT(tracks_result_write(res, dir, 1) == TRACKS_OK);
    EXPECT(tracks_result_write(res, dir, 0) == TRACKS_ERR_EXISTS);
    EXPECT(tracks_analyze(dir) == TRACKS_OK);
    char cmd[300];
    snprintf(cmd, sizeof cmd, "rm -rf %s", dir);
    EXPECT(system(cmd) == 0);

    tracks_result_free(res);
    tracks_config_free(cfg);
}

static void test_fluid(void) {
    double rs = 0, r = 0;
    EXPECT(tracks_fluid_throughput(116800, 1, 1e9, 1, 1e-4, 0.2, 1, 1e-4, &rs, &r) == TRACKS_OK);
    EXPECT(fabs(rs - 116800 / (1e-4 + 1.168e-4)) / rs < 1e-9);
    EXPECT(r < rs);
    EXPECT(tracks_fluid_throughput(1, 1, 0, 1, 1e-4, 0.2, 1, 1e-4, &rs, &r) == TRACKS_ERR_ARGUMENT);
}

int main(void) {
    EXPECT(tracks_version() != NULL);
    test_config();
    test_run();
    test_fluid();
    if (failures) {
        fprintf(stderr, "%d failure(s)\n", failures);
        return 1;
    }
    puts("C API: all checks passed");
    return 0;
}
