#include <pwd.h>
#include <shadow.h>
#include <stddef.h>

/*
 * Return 1 if the named user has an entry in the password database.
 */
static int user_exists (const char *name)
{
	struct passwd *pw;

	if (NULL == name) {
		return 0;
	}

	pw = getpwnam (name);

	return NULL != pw;
}
